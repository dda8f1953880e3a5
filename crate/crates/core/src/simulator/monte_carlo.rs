use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::{simulate_trial_with_stats, GenerativeConfig};
use crate::error::{Error, Result};
use crate::estimator::{fit_wcls, FitResult, ModelSpec};
use crate::inference::{confidence_intervals, wald_test, ContrastSpec};

/// Replicate fit failures above this fraction fail the whole run.
const FAILURE_BUDGET: f64 = 0.01;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of replicate `index` under master seed `master`.
///
/// `index ↦ (index + 1)·φ` is a bijection on `u64` for odd `φ`, and the
/// finalizer is a bijection, so distinct indices never share a seed.
pub fn derive_replicate_seed(master: u64, index: u64) -> u64 {
    mix64(mix64(master).wrapping_add(index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct McOptions {
    /// Subjects per simulated trial.
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    /// Test level; intervals have level `1 - η`.
    pub eta: f64,
    /// Worker threads; `None` uses the global default. Results do not depend on it.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateRecord {
    pub index: usize,
    pub seed: u64,
    pub beta_hat: Vec<f64>,
    pub se: Vec<f64>,
    pub covered: Vec<bool>,
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
    pub clipped_probabilities: u64,
    pub correction_fallbacks: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSummary {
    pub family: String,
    pub n: usize,
    pub replicates: usize,
    pub completed: usize,
    pub failures: usize,
    pub seed: u64,
    pub eta: f64,
    pub terms: Vec<String>,
    pub truth: Vec<f64>,
    pub bias: Vec<f64>,
    pub rmse: Vec<f64>,
    pub sd: Vec<f64>,
    pub mean_se: Vec<f64>,
    pub coverage: Vec<f64>,
    pub rejection_rate: f64,
    pub clipped_probabilities: u64,
    pub correction_fallbacks: usize,
}

fn failed(index: usize, seed: u64, clipped: u64, err: Error) -> ReplicateRecord {
    ReplicateRecord {
        index,
        seed,
        beta_hat: vec![],
        se: vec![],
        covered: vec![],
        statistic: f64::NAN,
        p_value: f64::NAN,
        reject: false,
        clipped_probabilities: clipped,
        correction_fallbacks: 0,
        error: Some(err.to_string()),
    }
}

fn one_replicate(
    config: &GenerativeConfig,
    spec: &ModelSpec,
    contrast: &ContrastSpec,
    truth: &[f64],
    opts: &McOptions,
    index: usize,
) -> ReplicateRecord {
    let seed = derive_replicate_seed(opts.seed, index as u64);
    let (data, stats) = match simulate_trial_with_stats(config, opts.n, seed) {
        Ok(v) => v,
        Err(e) => return failed(index, seed, 0, e),
    };
    let analysed = fit_wcls(&data, spec).and_then(|fit: FitResult| {
        let test = wald_test(&fit, contrast, opts.eta)?;
        let unit_rows: Vec<Vec<f64>> = (0..fit.beta_hat.len())
            .map(|j| (0..fit.beta_hat.len()).map(|i| f64::from(u8::from(i == j))).collect())
            .collect();
        let ci = confidence_intervals(&fit, &unit_rows, opts.eta)?;
        Ok((fit, test, ci))
    });
    match analysed {
        Ok((fit, test, ci)) => ReplicateRecord {
            index,
            seed,
            covered: ci.iter().zip(truth).map(|(c, &b)| c.lo <= b && b <= c.hi).collect(),
            se: ci.iter().map(|c| c.se).collect(),
            beta_hat: fit.beta_hat,
            statistic: test.statistic,
            p_value: test.p_value,
            reject: test.reject,
            clipped_probabilities: stats.clipped_probabilities,
            correction_fallbacks: fit.correction_fallbacks,
            error: None,
        },
        Err(e) => failed(index, seed, stats.clipped_probabilities, e),
    }
}

/// Simulates, fits, and tests `replicates` trials and aggregates the results.
///
/// `truth` is the estimand `β` (length `Kp`) used for bias and coverage.
/// Replicates run in parallel, each with its own RNG stream; aggregation is
/// in replicate order, so the summary is identical for any thread count.
pub fn run_monte_carlo(
    config: &GenerativeConfig,
    spec: &ModelSpec,
    contrast: &ContrastSpec,
    truth: &[f64],
    opts: &McOptions,
) -> Result<(McSummary, Vec<ReplicateRecord>)> {
    config.validate()?;
    if opts.replicates == 0 {
        return Err(Error::Invalid("replicates must be >= 1".into()));
    }
    let kp = config.k_arms * spec.f.len();
    if truth.len() != kp {
        return Err(Error::Invalid(format!("truth has length {}, expected K*p = {kp}", truth.len())));
    }
    let run = || -> Vec<ReplicateRecord> {
        (0..opts.replicates)
            .into_par_iter()
            .map(|i| one_replicate(config, spec, contrast, truth, opts, i))
            .collect()
    };
    let records = match opts.threads {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .map_err(|e| Error::Invalid(format!("cannot start worker pool: {e}")))?
            .install(run),
        None => run(),
    };

    let ok: Vec<&ReplicateRecord> = records.iter().filter(|r| r.error.is_none()).collect();
    let failures = records.len() - ok.len();
    if ok.is_empty() || failures as f64 > FAILURE_BUDGET * opts.replicates as f64 {
        return Err(Error::FailureBudget {
            failed: failures,
            replicates: opts.replicates,
            first_error: records.iter().find_map(|r| r.error.clone()).unwrap_or_default(),
        });
    }
    let m = ok.len() as f64;
    let mean = |f: &dyn Fn(&ReplicateRecord) -> f64| ok.iter().map(|r| f(r)).sum::<f64>() / m;
    let mut bias = Vec::with_capacity(kp);
    let mut rmse = Vec::with_capacity(kp);
    let mut sd = Vec::with_capacity(kp);
    let mut mean_se = Vec::with_capacity(kp);
    let mut coverage = Vec::with_capacity(kp);
    for j in 0..kp {
        let avg = mean(&|r| r.beta_hat[j]);
        bias.push(avg - truth[j]);
        rmse.push(mean(&|r| (r.beta_hat[j] - truth[j]).powi(2)).sqrt());
        sd.push(if ok.len() > 1 {
            (ok.iter().map(|r| (r.beta_hat[j] - avg).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
        } else {
            0.0
        });
        mean_se.push(mean(&|r| r.se[j]));
        coverage.push(mean(&|r| f64::from(u8::from(r.covered[j]))));
    }
    let summary = McSummary {
        family: config.family.name().to_owned(),
        n: opts.n,
        replicates: opts.replicates,
        completed: ok.len(),
        failures,
        seed: opts.seed,
        eta: opts.eta,
        terms: beta_term_names(config.k_arms, &spec.f.term_names()),
        truth: truth.to_vec(),
        bias,
        rmse,
        sd,
        mean_se,
        coverage,
        rejection_rate: mean(&|r| f64::from(u8::from(r.reject))),
        clipped_probabilities: records.iter().map(|r| r.clipped_probabilities).sum(),
        correction_fallbacks: ok.iter().map(|r| r.correction_fallbacks).sum(),
    };
    Ok((summary, records))
}

fn beta_term_names(k_arms: usize, f_terms: &[String]) -> Vec<String> {
    let mut names = Vec::new();
    for k in 1..=k_arms {
        for f in f_terms {
            if f_terms.len() == 1 && f == "(Intercept)" {
                names.push(format!("beta{k}"));
            } else {
                names.push(format!("beta{k}:{f}"));
            }
        }
    }
    names
}

/// One header row and one value row; per-term columns are suffixed with the term name.
pub fn write_summary_csv<W: Write>(summary: &McSummary, writer: W) -> Result<()> {
    let mut header: Vec<String> = [
        "family", "n", "replicates", "completed", "failures", "seed", "eta", "rejection_rate",
        "clipped_probabilities", "correction_fallbacks",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let mut row = vec![
        summary.family.clone(),
        summary.n.to_string(),
        summary.replicates.to_string(),
        summary.completed.to_string(),
        summary.failures.to_string(),
        summary.seed.to_string(),
        summary.eta.to_string(),
        summary.rejection_rate.to_string(),
        summary.clipped_probabilities.to_string(),
        summary.correction_fallbacks.to_string(),
    ];
    for (j, term) in summary.terms.iter().enumerate() {
        for (name, values) in [
            ("truth", &summary.truth),
            ("bias", &summary.bias),
            ("rmse", &summary.rmse),
            ("sd", &summary.sd),
            ("mean_se", &summary.mean_se),
            ("coverage", &summary.coverage),
        ] {
            header.push(format!("{name}_{term}"));
            row.push(values[j].to_string());
        }
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(&header)?;
    w.write_record(&row)?;
    w.flush()?;
    Ok(())
}

/// One row per replicate, for plotting sampling distributions.
pub fn write_replicates_csv<W: Write>(terms: &[String], records: &[ReplicateRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["replicate".to_owned(), "seed".to_owned()];
    header.extend(terms.iter().map(|t| format!("est_{t}")));
    header.extend(terms.iter().map(|t| format!("se_{t}")));
    header.extend(["statistic", "p_value", "reject", "error"].iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![(r.index + 1).to_string(), r.seed.to_string()];
        if r.error.is_none() {
            row.extend(r.beta_hat.iter().map(f64::to_string));
            row.extend(r.se.iter().map(f64::to_string));
            row.extend([r.statistic.to_string(), r.p_value.to_string(), u8::from(r.reject).to_string()]);
        } else {
            row.extend(std::iter::repeat_n(String::new(), 2 * terms.len() + 3));
        }
        row.push(r.error.clone().unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::build_contrast;
    use crate::numerics::Matrix;
    use crate::simulator::Family;

    #[test]
    fn replicate_seeds_are_deterministic_and_distinct() {
        assert_eq!(derive_replicate_seed(42, 7), derive_replicate_seed(42, 7));
        let mut state = 12345u64;
        for _ in 0..1000 {
            state = mix64(state);
            assert_ne!(derive_replicate_seed(state, 0), derive_replicate_seed(state, 1));
        }
        let seeds: std::collections::HashSet<u64> = (0..10_000).map(|i| derive_replicate_seed(9, i)).collect();
        assert_eq!(seeds.len(), 10_000);
    }

    fn setup() -> (GenerativeConfig, ModelSpec, ContrastSpec) {
        let config = GenerativeConfig {
            family: Family::Gm0,
            ..GenerativeConfig::gm0(vec![vec![0.4, 0.3, 0.3]; 4], vec![0.9; 4], vec![0.5; 4], vec![vec![0.3, 0.3]; 4])
        };
        let contrast = build_contrast(Matrix::row_vector(&[1.0, -1.0]), 1).unwrap();
        (config, ModelSpec::default(), contrast)
    }

    #[test]
    fn single_replicate_summary() {
        let (config, spec, contrast) = setup();
        let opts = McOptions { n: 25, replicates: 1, seed: 5, eta: 0.05, threads: Some(1) };
        let (s, recs) = run_monte_carlo(&config, &spec, &contrast, &[0.3, 0.3], &opts).unwrap();
        assert_eq!(s.completed, 1);
        assert!((s.bias[0] - (recs[0].beta_hat[0] - 0.3)).abs() < 1e-15);
        assert!(s.coverage.iter().all(|&c| c == 0.0 || c == 1.0));
        assert!((s.rmse[0] - s.bias[0].abs()).abs() < 1e-15);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let (config, spec, contrast) = setup();
        let base = McOptions { n: 20, replicates: 40, seed: 99, eta: 0.05, threads: Some(1) };
        let a = run_monte_carlo(&config, &spec, &contrast, &[0.3, 0.3], &base).unwrap();
        let b = run_monte_carlo(&config, &spec, &contrast, &[0.3, 0.3], &McOptions { threads: Some(4), ..base }).unwrap();
        assert_eq!(a, b);
        let mut buf_a = Vec::new();
        let mut buf_b = Vec::new();
        write_summary_csv(&a.0, &mut buf_a).unwrap();
        write_summary_csv(&b.0, &mut buf_b).unwrap();
        assert_eq!(buf_a, buf_b);
        assert!(a.0.rmse.iter().zip(&a.0.bias).all(|(r, b)| *r >= b.abs()));
    }

    #[test]
    fn too_many_failures_fail_the_run() {
        let (config, spec, contrast) = setup();
        // Three subjects cannot support a fit with q + Kp = 3 parameters.
        let opts = McOptions { n: 3, replicates: 5, seed: 1, eta: 0.05, threads: Some(1) };
        assert!(matches!(
            run_monte_carlo(&config, &spec, &contrast, &[0.3, 0.3], &opts),
            Err(Error::FailureBudget { failed: 5, replicates: 5, .. })
        ));
    }

    #[test]
    fn replicate_csv_shape() {
        let (config, spec, contrast) = setup();
        let opts = McOptions { n: 20, replicates: 3, seed: 2, eta: 0.05, threads: None };
        let (s, recs) = run_monte_carlo(&config, &spec, &contrast, &[0.3, 0.3], &opts).unwrap();
        let mut buf = Vec::new();
        write_replicates_csv(&s.terms, &recs, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("replicate,seed,est_beta1,est_beta2,se_beta1,se_beta2,"));
    }
}
