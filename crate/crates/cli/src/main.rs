//! `mrtcee`: estimation, testing, sample size, and simulation for
//! micro-randomized trials with multi-level treatments.
//!
//! Exit codes: 0 success, 2 input or validation error, 3 numerical failure.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use mrt_cee::config::{KeyValueConfig, Sweep};
use mrt_cee::data::{load_csv, CsvSchema, NumeratorPolicy, ProbabilitySource};
use mrt_cee::design::{design_inputs_from_config, required_sample_size, sample_size_sweep};
use mrt_cee::estimator::{fit_wcls, Correction, FeatureSet, FitResult, ModelSpec};
use mrt_cee::inference::{
    build_contrast, confidence_intervals, contrast_preset, read_contrast_csv, wald_test, IntervalRow, TestResult,
};
use mrt_cee::simulator::{
    run_monte_carlo, scenario_from_config, write_replicates_csv, write_summary_csv, McOptions,
};
use mrt_cee::Error;

#[derive(Parser)]
#[command(name = "mrtcee", version, about = "Causal excursion effects for multi-level treatments in micro-randomized trials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the weighted and centered least-squares model to trial data.
    Estimate(EstimateArgs),
    /// Compute the number of participants needed to reach a target power.
    Samplesize(SampleSizeArgs),
    /// Run a Monte Carlo experiment from a scenario file.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct EstimateArgs {
    /// Trial data: one row per participant and decision point.
    #[arg(long)]
    data: PathBuf,
    /// Moderator columns, comma-separated, or `intercept` for none.
    #[arg(long)]
    f_cols: String,
    /// Control columns, comma-separated, or `intercept` for none.
    #[arg(long)]
    g_cols: String,
    /// Excursion length.
    #[arg(long, default_value_t = 1)]
    delta: usize,
    /// match_randomization, empirical_per_t, or empirical_pooled.
    #[arg(long, default_value = "empirical_per_t")]
    numerator: NumeratorPolicy,
    /// Contrast: a headerless CSV file of rows over arms, `all-null`, or `pairwise(j,k)`.
    #[arg(long)]
    contrast: Option<String>,
    /// Test level; intervals have coverage 1 - alpha.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// mancl_derouen or none.
    #[arg(long, default_value = "mancl_derouen")]
    correction: Correction,
    #[arg(long, default_value = "id")]
    id_col: String,
    #[arg(long, default_value = "t")]
    t_col: String,
    #[arg(long, default_value = "avail")]
    avail_col: String,
    #[arg(long, default_value = "trt")]
    trt_col: String,
    #[arg(long, default_value = "outcome")]
    outcome_col: String,
    /// Constant randomization probabilities `p0,p1,...` instead of `prob_k` columns.
    #[arg(long, value_delimiter = ',')]
    probs: Option<Vec<f64>>,
    /// Output path (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct SampleSizeArgs {
    /// Flat `key = value` design file.
    #[arg(long)]
    config: PathBuf,
    /// Recompute over `key=lo:hi:step`.
    #[arg(long)]
    sweep: Option<Sweep>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Defaults to json, or csv with --sweep.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Flat `key = value` scenario file.
    #[arg(long)]
    scenario: PathBuf,
    /// Overrides the scenario's `replicates`.
    #[arg(long)]
    replicates: Option<usize>,
    /// Overrides the scenario's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (all cores if unset); results do not depend on it.
    #[arg(long, env = "MRTCEE_THREADS", value_parser = clap::value_parser!(u64).range(1..))]
    threads: Option<u64>,
    /// Summary output path (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write one CSV row per replicate here.
    #[arg(long)]
    replicates_out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

/// Failure of a subcommand, carrying its exit code.
enum Failure {
    Input(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Estimate(args) => estimate(args),
        Command::Samplesize(args) => samplesize(args),
        Command::Simulate(args) => simulate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}

fn open_out(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json(path: Option<&Path>, value: &Value) -> CmdResult {
    let mut w = open_out(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Failure::Input(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn feature_set(spec: &str) -> FeatureSet {
    let cols: Vec<&str> = spec
        .split(',')
        .map(str::trim)
        .filter(|c| !c.is_empty() && *c != "intercept")
        .collect();
    FeatureSet::with_intercept(&cols)
}

fn interval_json(label: &str, r: &IntervalRow) -> Value {
    json!({ "term": label, "estimate": r.estimate, "se": r.se, "ci_lower": r.lo, "ci_upper": r.hi, "p_value": r.p_value })
}

fn test_json(t: &TestResult) -> Value {
    json!({
        "statistic": t.statistic,
        "f_statistic": t.scaled_statistic,
        "df1": t.df1,
        "df2": t.df2,
        "critical_value": t.critical_value,
        "p_value": t.p_value,
        "reject": t.reject,
    })
}

fn unit_rows(dim: usize) -> Vec<Vec<f64>> {
    (0..dim)
        .map(|j| {
            let mut row = vec![0.0; dim];
            row[j] = 1.0;
            row
        })
        .collect()
}

fn estimate(args: EstimateArgs) -> CmdResult {
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(Failure::Input(format!("--alpha must be in (0, 1), got {}", args.alpha)));
    }
    let schema = CsvSchema {
        id: args.id_col,
        t: args.t_col,
        availability: args.avail_col,
        treatment: args.trt_col,
        outcome: args.outcome_col,
        probabilities: args.probs.map_or(ProbabilitySource::Auto, ProbabilitySource::Constant),
    };
    let data = load_csv(&args.data, &schema)?;
    let spec = ModelSpec {
        f: feature_set(&args.f_cols),
        g: feature_set(&args.g_cols),
        delta: args.delta,
        numerator: args.numerator,
        correction: args.correction,
    };
    let fit = fit_wcls(&data, &spec)?;

    let terms = fit.beta_terms();
    let coefficients = confidence_intervals(&fit, &unit_rows(terms.len()), args.alpha)?;
    let contrast = match &args.contrast {
        None => None,
        Some(c) => {
            let l = if Path::new(c).is_file() {
                read_contrast_csv(File::open(c)?)?
            } else {
                contrast_preset(c, fit.k_arms)?
            };
            let spec = build_contrast(l, fit.p)?;
            let labels = spec.row_labels(&fit.f_terms);
            let rows = confidence_intervals(&fit, &spec.coefficient_rows(), args.alpha)?;
            let test = wald_test(&fit, &spec, args.alpha)?;
            Some((labels, rows, test))
        }
    };

    match args.format {
        Format::Json => write_json(args.out.as_deref(), &estimate_json(&fit, &terms, &coefficients, &contrast, args.alpha)),
        Format::Csv => write_estimate_csv(args.out.as_deref(), &terms, &coefficients, &contrast),
    }
}

type ContrastOutput = Option<(Vec<String>, Vec<IntervalRow>, TestResult)>;

fn estimate_json(fit: &FitResult, terms: &[String], coefficients: &[IntervalRow], contrast: &ContrastOutput, alpha: f64) -> Value {
    let mut out = json!({
        "n": fit.n,
        "t_points": fit.t_points,
        "k_arms": fit.k_arms,
        "p": fit.p,
        "q": fit.q,
        "delta": fit.delta,
        "numerator": fit.numerator.rows(),
        "correction": fit.correction.name(),
        "correction_fallbacks": fit.correction_fallbacks,
        "ci_level": 1.0 - alpha,
        "control_terms": fit.g_terms,
        "alpha_hat": fit.alpha_hat,
        "coefficients": terms.iter().zip(coefficients).map(|(t, r)| interval_json(t, r)).collect::<Vec<_>>(),
        "cov_beta": fit.cov_beta.to_rows(),
    });
    if let Some((labels, rows, test)) = contrast {
        out["contrasts"] = labels.iter().zip(rows).map(|(t, r)| interval_json(t, r)).collect();
        out["test"] = test_json(test);
    }
    out
}

fn write_estimate_csv(path: Option<&Path>, terms: &[String], coefficients: &[IntervalRow], contrast: &ContrastOutput) -> CmdResult {
    let mut w = csv::Writer::from_writer(open_out(path)?);
    let csv_err = |e: csv::Error| Failure::Input(e.to_string());
    w.write_record(["term", "estimate", "se", "ci_lower", "ci_upper", "p_value"]).map_err(csv_err)?;
    let mut emit = |label: &str, r: &IntervalRow| {
        w.write_record([
            label.to_owned(),
            r.estimate.to_string(),
            r.se.to_string(),
            r.lo.to_string(),
            r.hi.to_string(),
            r.p_value.to_string(),
        ])
    };
    for (t, r) in terms.iter().zip(coefficients) {
        emit(t, r).map_err(csv_err)?;
    }
    if let Some((labels, rows, test)) = contrast {
        for (t, r) in labels.iter().zip(rows) {
            emit(t, r).map_err(csv_err)?;
        }
        let label = format!("F({}, {})", test.df1, test.df2);
        w.write_record([label, test.scaled_statistic.to_string(), String::new(), String::new(), String::new(), test.p_value.to_string()])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn samplesize(args: SampleSizeArgs) -> CmdResult {
    let cfg = KeyValueConfig::load(&args.config)?;
    if let Some(sweep) = args.sweep {
        let points = sample_size_sweep(&cfg, &sweep)?;
        return match args.format.unwrap_or(Format::Csv) {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(open_out(args.out.as_deref())?);
                let csv_err = |e: csv::Error| Failure::Input(e.to_string());
                w.write_record([sweep.key.as_str(), "n", "achieved_power", "error"]).map_err(csv_err)?;
                for p in &points {
                    let row = match &p.outcome {
                        Ok(r) => [p.value.to_string(), r.n.to_string(), r.achieved_power.to_string(), String::new()],
                        Err(e) => [p.value.to_string(), String::new(), String::new(), e.clone()],
                    };
                    w.write_record(row).map_err(csv_err)?;
                }
                w.flush()?;
                Ok(())
            }
            Format::Json => {
                let rows: Vec<Value> = points
                    .iter()
                    .map(|p| match &p.outcome {
                        Ok(r) => json!({ "value": p.value, "n": r.n, "achieved_power": r.achieved_power }),
                        Err(e) => json!({ "value": p.value, "error": e }),
                    })
                    .collect();
                write_json(args.out.as_deref(), &json!({ "key": sweep.key, "points": rows }))
            }
        };
    }

    let inputs = design_inputs_from_config(&cfg)?;
    cfg.finish()?;
    let result = required_sample_size(&inputs)?;
    match args.format.unwrap_or(Format::Json) {
        Format::Json => write_json(
            args.out.as_deref(),
            &json!({ "n": result.n, "achieved_power": result.achieved_power, "lambda_per_n": result.lambda_per_n }),
        ),
        Format::Csv => {
            let mut w = open_out(args.out.as_deref())?;
            writeln!(w, "n,achieved_power,lambda_per_n")?;
            writeln!(w, "{},{},{}", result.n, result.achieved_power, result.lambda_per_n)?;
            w.flush()?;
            Ok(())
        }
    }
}

fn simulate(args: SimulateArgs) -> CmdResult {
    let mut cfg = KeyValueConfig::load(&args.scenario)?;
    if let Some(r) = args.replicates {
        cfg.set("replicates", r.to_string());
    }
    if let Some(s) = args.seed {
        cfg.set("seed", s.to_string());
    }
    let scenario = scenario_from_config(&cfg)?;
    let opts = McOptions {
        n: scenario.n,
        replicates: scenario.replicates,
        seed: scenario.seed,
        eta: scenario.eta,
        threads: args.threads.map(|t| t as usize),
    };
    let (summary, records) =
        run_monte_carlo(&scenario.generative, &scenario.spec, &scenario.contrast, &scenario.truth, &opts)?;

    if let Some(path) = &args.replicates_out {
        write_replicates_csv(&summary.terms, &records, BufWriter::new(File::create(path)?))?;
    }
    match args.format {
        Format::Json => {
            let mut value = serde_json::to_value(&summary).map_err(|e| Failure::Input(e.to_string()))?;
            value["n_from_calculator"] = json!(scenario.n_from_calculator);
            write_json(args.out.as_deref(), &value)
        }
        Format::Csv => Ok(write_summary_csv(&summary, open_out(args.out.as_deref())?)?),
    }
}
