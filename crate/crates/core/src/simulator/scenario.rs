use super::{consistency_study_config, Family, GenerativeConfig};
use crate::config::KeyValueConfig;
use crate::design::{
    build_pt, design_inputs_from_patterns, eo_pattern, patterns_from_config, required_sample_size,
    time_basis, time_basis_names, EoKind, MeeKind,
};
use crate::error::{Error, Result};
use crate::estimator::{Correction, FeatureSet, ModelSpec};
use crate::inference::{build_contrast, ContrastSpec};
use crate::numerics::{solve_spd, Matrix};

/// Everything needed for one Monte Carlo experiment.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub generative: GenerativeConfig,
    pub spec: ModelSpec,
    pub contrast: ContrastSpec,
    /// Estimand of `β` under the analysis model.
    pub truth: Vec<f64>,
    pub n: usize,
    /// True when `n` came from the sample-size calculator.
    pub n_from_calculator: bool,
    pub replicates: usize,
    pub seed: u64,
    pub eta: f64,
}

fn feature_set(degree: usize) -> FeatureSet {
    FeatureSet::with_intercept(&time_basis_names(degree))
}

/// Population WCLS target when the analysis uses basis `f_t` of `degree`:
/// the `τ(t) P_t`-weighted least-squares projection of the true effect curves.
fn projected_truth(config: &GenerativeConfig, degree: usize) -> Result<Vec<f64>> {
    let (k, p) = (config.k_arms, degree + 1);
    let mut normal = Matrix::zeros(k * p, k * p);
    let mut rhs = vec![0.0; k * p];
    for t in 0..config.t_points {
        let pt = build_pt(&config.rand_probs[t][1..])?;
        let f = time_basis(degree, t + 1);
        let w = config.tau[t];
        let pm = pt.matvec(&config.effects[t]);
        for a in 0..k {
            for i in 0..p {
                rhs[a * p + i] += w * pm[a] * f[i];
            }
        }
        let mut fft = Matrix::zeros(p, p);
        fft.add_outer(1.0, &f, &f);
        normal = normal.add(&pt.kron(&fft).scale(w));
    }
    Ok(solve_spd(&normal, &rhs)?.solution)
}

/// Reads a scenario: the design keys (`K, T, p, tau_kind, AA, theta_tau,
/// f_kind, theta_f1, theta_f2, sate1..`), the outcome pattern (`eo_kind,
/// theta_g, AEO`), the family and its parameters (`family, nu1, nu2, nu3,
/// theta_r, theta_s`), the analysis model (`analysis_f_kind,
/// analysis_g_kind, correction`), the test (`L, eta`), and the run
/// (`n, replicates, seed`). Without `n`, the calculator's answer at `power`
/// is used. `preset = consistency_study` selects the covariate model
/// instead of the pattern keys.
pub fn scenario_from_config(cfg: &KeyValueConfig) -> Result<Scenario> {
    let replicates = cfg.get_or("replicates", 1000usize)?;
    let seed = cfg.get_or("seed", 1u64)?;
    let eta = cfg.get_or("eta", 0.05)?;
    let correction: Correction = cfg.get_or("correction", "mancl_derouen".to_owned())?.parse()?;

    let scenario = if let Some(preset) = cfg.raw("preset") {
        if preset != "consistency_study" {
            return Err(Error::Config(format!("unknown preset `{preset}` (expected consistency_study)")));
        }
        let generative = consistency_study_config();
        let k = generative.k_arms;
        let l = match cfg.get_matrix("L")? {
            Some(rows) => Matrix::from_rows(&rows)?,
            None => Matrix::identity(k),
        };
        let z_mean = generative.covariate.as_ref().map_or(0.0, |c| c.mean());
        let truth = generative.effects[0]
            .iter()
            .zip(&generative.covariate.as_ref().expect("preset has a covariate").effect_slope)
            .map(|(a, b)| a + b * z_mean)
            .collect();
        Scenario {
            spec: ModelSpec {
                f: FeatureSet::intercept_only(),
                g: FeatureSet::with_intercept(&["z"]),
                correction,
                ..ModelSpec::default()
            },
            contrast: build_contrast(l, 1)?,
            truth,
            n: cfg.get_or("n", 30)?,
            n_from_calculator: false,
            replicates,
            seed,
            eta,
            generative,
        }
    } else {
        let pat = patterns_from_config(cfg)?;
        let family: Family = cfg.get_or("family", "gm0".to_owned())?.parse()?;
        let eo_kind: EoKind = cfg.get_or("eo_kind", "constant".to_owned())?.parse()?;
        let eo = eo_pattern(eo_kind, cfg.get_or("theta_g", 0.0)?, cfg.get_or("AEO", 0.0)?, &pat.tau)?;
        let f_kind: MeeKind = cfg.get_or("analysis_f_kind", pat.mee.kind.name().to_owned())?.parse()?;
        let g_kind: EoKind = cfg.get_or("analysis_g_kind", eo_kind.name().to_owned())?.parse()?;

        let mut probs = vec![1.0 - pat.active_probs.iter().sum::<f64>()];
        probs.extend(&pat.active_probs);
        // Unit outcome variance, so standardized and raw effects coincide and
        // the reference-arm mean is EO(t) minus the probability-weighted effects.
        let baseline = (0..pat.t_points)
            .map(|t| {
                eo.values[t]
                    - pat.active_probs.iter().zip(&pat.mee.curves[t]).map(|(p, m)| p * m).sum::<f64>()
            })
            .collect();
        let generative = GenerativeConfig {
            family,
            theta_r: cfg.get_or("theta_r", 0.0)?,
            theta_s: cfg.get_or("theta_s", 0.0)?,
            nu1: cfg.get_or("nu1", 0.0)?,
            nu2: cfg.get_or("nu2", 0.0)?,
            nu3: cfg.get_or("nu3", 0.0)?,
            ..GenerativeConfig::gm0(vec![probs; pat.t_points], pat.tau.clone(), baseline, pat.mee.curves.clone())
        };
        generative.validate()?;

        let spec = ModelSpec {
            f: feature_set(f_kind.degree()),
            g: feature_set(g_kind.degree()),
            correction,
            ..ModelSpec::default()
        };
        let inputs = design_inputs_from_patterns(cfg, &pat, spec.g.len())?;
        let contrast = build_contrast(inputs.l_matrix.clone(), spec.f.len())?;
        let truth = projected_truth(&generative, f_kind.degree())?;
        let (n, n_from_calculator) = match cfg.get::<usize>("n")? {
            Some(n) => (n, false),
            None => (required_sample_size(&inputs)?.n, true),
        };
        Scenario { generative, spec, contrast, truth, n, n_from_calculator, replicates, seed, eta }
    };
    cfg.finish()?;
    Ok(scenario)
}
