//! Synthetic MRT data from parametric generative models, and a
//! deterministic parallel Monte Carlo harness on top of the estimator.
//!
//! Families:
//! - `gm0`: `I_t ~ Bernoulli(τ(t))`, categorical `A_t` when available,
//!   Gaussian noise.
//! - `gm_ev`: noise scaled by `r(t) s(A_t)` (time- and arm-dependent variance).
//! - `gm_sc`: noise `ν₁ε_{t-1} + ν₀ε_t` (serially correlated outcomes).
//! - `gm_ea`: availability depends on the previous treatment and noise.

mod monte_carlo;
mod scenario;

pub use monte_carlo::{
    derive_replicate_seed, run_monte_carlo, write_replicates_csv, write_summary_csv, McOptions,
    McSummary, ReplicateRecord,
};
pub use scenario::{scenario_from_config, Scenario};

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{DecisionRecord, MrtDataset, SubjectTrajectory};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Gm0,
    GmEv,
    GmSc,
    GmEa,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Gm0 => "gm0",
            Family::GmEv => "gm_ev",
            Family::GmSc => "gm_sc",
            Family::GmEa => "gm_ea",
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "gm0" => Ok(Family::Gm0),
            "gm_ev" => Ok(Family::GmEv),
            "gm_sc" => Ok(Family::GmSc),
            "gm_ea" => Ok(Family::GmEa),
            other => Err(Error::Config(format!(
                "unknown family `{other}` (expected gm0, gm_ev, gm_sc or gm_ea)"
            ))),
        }
    }
}

/// A per-decision-point covariate `Z_t`, drawn uniformly from `values`,
/// that shifts the outcome by `level_shift[level]` and moderates arm `k`'s
/// effect by `effect_slope[k-1] · Z_t`. Exposed to the analysis as feature `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateModel {
    pub values: Vec<f64>,
    pub level_shift: Vec<f64>,
    pub effect_slope: Vec<f64>,
}

impl CovariateModel {
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerativeConfig {
    pub family: Family,
    pub k_arms: usize,
    pub t_points: usize,
    /// `T x (K+1)`: `P(A_t = k | I_t = 1)`, reference arm first.
    pub rand_probs: Vec<Vec<f64>>,
    /// `τ(t)`.
    pub tau: Vec<f64>,
    /// Outcome mean under the reference arm, `g*_tᵀα*`.
    pub baseline: Vec<f64>,
    /// `T x K`: `f*_tᵀβ*_k`.
    pub effects: Vec<Vec<f64>>,
    pub theta_r: f64,
    pub theta_s: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub nu3: f64,
    pub covariate: Option<CovariateModel>,
}

impl GenerativeConfig {
    /// Plain `gm0` model with no variance, correlation, or endogeneity terms.
    pub fn gm0(rand_probs: Vec<Vec<f64>>, tau: Vec<f64>, baseline: Vec<f64>, effects: Vec<Vec<f64>>) -> Self {
        let t_points = tau.len();
        let k_arms = rand_probs.first().map_or(0, |r| r.len().saturating_sub(1));
        Self {
            family: Family::Gm0,
            k_arms,
            t_points,
            rand_probs,
            tau,
            baseline,
            effects,
            theta_r: 0.0,
            theta_s: 0.0,
            nu1: 0.0,
            nu2: 0.0,
            nu3: 0.0,
            covariate: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (k, t_points) = (self.k_arms, self.t_points);
        if k == 0 || t_points == 0 {
            return Err(Error::Invalid("generative model needs K >= 1 and T >= 1".into()));
        }
        if self.rand_probs.len() != t_points
            || self.tau.len() != t_points
            || self.baseline.len() != t_points
            || self.effects.len() != t_points
        {
            return Err(Error::Invalid("generative curves must all have length T".into()));
        }
        for (t, p) in self.rand_probs.iter().enumerate() {
            if p.len() != k + 1
                || p.iter().any(|&v| !(v > 0.0 && v < 1.0))
                || (p.iter().sum::<f64>() - 1.0).abs() > 1e-8
            {
                return Err(Error::Invalid(format!(
                    "t = {}: randomization probabilities must be K+1 values in (0, 1) summing to 1",
                    t + 1
                )));
            }
        }
        if self.tau.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::Invalid("τ(t) must lie in [0, 1]".into()));
        }
        if self.effects.iter().any(|r| r.len() != k) {
            return Err(Error::Invalid("effect curves must be T x K".into()));
        }
        let finite = |v: &f64| v.is_finite();
        if !self.baseline.iter().all(finite) || !self.effects.iter().flatten().all(finite) {
            return Err(Error::Invalid("generative curves must be finite".into()));
        }
        if !(self.nu1.abs() < 1.0) {
            return Err(Error::Invalid(format!("|ν₁| must be < 1, got {}", self.nu1)));
        }
        if self.family == Family::GmEv {
            for t in 1..=t_points {
                gm_ev_scales(self.theta_r, self.theta_s, &self.rand_probs[t - 1], t, t_points)?;
            }
        }
        if let Some(c) = &self.covariate {
            if c.values.is_empty() || c.level_shift.len() != c.values.len() || c.effect_slope.len() != k {
                return Err(Error::Invalid(
                    "covariate model needs one shift per level and one slope per arm".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn feature_names(&self) -> Vec<String> {
        if self.covariate.is_some() {
            vec!["z".to_owned()]
        } else {
            vec![]
        }
    }

    /// `ν₀ = sqrt(1 - ν₁²)`, so the serially correlated noise has unit variance.
    pub fn nu0(&self) -> f64 {
        (1.0 - self.nu1 * self.nu1).sqrt()
    }
}

/// Variance shapes for `gm_ev`: `r(t)` with `r²` linear from `1 + θ_r` at
/// `t = 1` to `1 - θ_r` at `t = T`, and `s(a)` for `a = 0..=2` with
/// `s² = a₀ + 1(a=1)θ_s + 1(a=2)b`, `b = -((p(1)-1)/(p(2)-1))θ_s`,
/// `a₀ = 1 - θ_s - b`. `probs` holds `p(0..=2)`; `t` is 1-based.
pub fn gm_ev_scales(theta_r: f64, theta_s: f64, probs: &[f64], t: usize, t_points: usize) -> Result<(f64, Vec<f64>)> {
    if probs.len() != 3 {
        return Err(Error::Invalid(
            "gm_ev variance shapes are defined for K = 2 active arms only".into(),
        ));
    }
    let frac = if t_points > 1 { (t - 1) as f64 / (t_points - 1) as f64 } else { 0.5 };
    let r2 = 1.0 + theta_r - 2.0 * theta_r * frac;
    let b = -((probs[1] - 1.0) / (probs[2] - 1.0)) * theta_s;
    let a0 = 1.0 - theta_s - b;
    let s2 = [a0, a0 + theta_s, a0 + b];
    if r2 < 0.0 || s2.iter().any(|&v| v < 0.0) {
        return Err(Error::Invalid(format!(
            "gm_ev scale has a negative radicand (θ_r = {theta_r}, θ_s = {theta_s})"
        )));
    }
    Ok((r2.sqrt(), s2.iter().map(|v| v.sqrt()).collect()))
}

/// Diagnostics from one simulated trial.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimulationStats {
    /// `gm_ea` availability probabilities that left `[0, 1]` and were clipped.
    pub clipped_probabilities: u64,
}

fn draw_arm(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.len() - 1
}

fn truncate_unit(x: f64) -> f64 {
    x.clamp(-1.0, 1.0)
}

pub fn simulate_trial(config: &GenerativeConfig, n: usize, seed: u64) -> Result<MrtDataset> {
    Ok(simulate_trial_with_stats(config, n, seed)?.0)
}

/// Simulates `n` independent subjects from one ChaCha8 stream seeded by `seed`.
pub fn simulate_trial_with_stats(
    config: &GenerativeConfig,
    n: usize,
    seed: u64,
) -> Result<(MrtDataset, SimulationStats)> {
    config.validate()?;
    if n == 0 {
        return Err(Error::Invalid("need at least one subject".into()));
    }
    let (k_arms, t_points) = (config.k_arms, config.t_points);
    let ev_scales: Vec<(f64, Vec<f64>)> = if config.family == Family::GmEv {
        (1..=t_points)
            .map(|t| gm_ev_scales(config.theta_r, config.theta_s, &config.rand_probs[t - 1], t, t_points))
            .collect::<Result<_>>()?
    } else {
        vec![]
    };
    let nu0 = config.nu0();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = SimulationStats::default();
    let mut subjects = Vec::with_capacity(n);

    for i in 0..n {
        let mut records = Vec::with_capacity(t_points);
        let mut prev_eps: f64 = if config.family == Family::GmSc { rng.sample(StandardNormal) } else { 0.0 };
        let mut prev_arm = 0usize;
        for t in 0..t_points {
            let probs = &config.rand_probs[t];
            let pi = if config.family == Family::GmEa && t > 0 {
                let prev_p = &config.rand_probs[t - 1];
                let centered: f64 = (1..=k_arms)
                    .map(|k| f64::from(u8::from(prev_arm == k)) - prev_p[k])
                    .sum();
                let raw = config.tau[t - 1] + config.nu2 * centered + config.nu3 * truncate_unit(prev_eps);
                if !(0.0..=1.0).contains(&raw) {
                    stats.clipped_probabilities += 1;
                }
                raw.clamp(0.0, 1.0)
            } else {
                config.tau[t]
            };
            let available = rng.random::<f64>() < pi;
            let arm = if available { draw_arm(&mut rng, probs) } else { 0 };
            let (z, shift, moderation) = match &config.covariate {
                Some(c) => {
                    let level = rng.random_range(0..c.values.len());
                    let z = c.values[level];
                    let m = if arm > 0 { c.effect_slope[arm - 1] * z } else { 0.0 };
                    (Some(z), c.level_shift[level], m)
                }
                None => (None, 0.0, 0.0),
            };
            let eps: f64 = rng.sample(StandardNormal);
            let noise = match config.family {
                Family::Gm0 | Family::GmEa => eps,
                Family::GmEv => {
                    let (r, s) = &ev_scales[t];
                    r * s[arm] * eps
                }
                Family::GmSc => config.nu1 * prev_eps + nu0 * eps,
            };
            let effect = if arm > 0 { config.effects[t][arm - 1] } else { 0.0 };
            records.push(DecisionRecord {
                t,
                available,
                treatment: arm,
                rand_probs: probs.clone(),
                outcome: config.baseline[t] + shift + effect + moderation + noise,
                features: z.into_iter().collect(),
            });
            prev_eps = eps;
            prev_arm = arm;
        }
        subjects.push(SubjectTrajectory { subject_id: format!("{}", i + 1), records });
    }
    let data = MrtDataset::new(subjects, k_arms, config.feature_names())?;
    Ok((data, stats))
}

/// The consistency-study model: `T = 15`, `p = (0.2, 0.5, 0.3)`, always
/// available, `Z_t` uniform on `{0, 1, 2}`, and
/// `Y = 0.2·1(Z=0) + 0.5·1(Z=1) + 0.4·1(Z=2) + 1(A=1)(0.1 + 0.3Z) + 1(A=2)(0.45 + 0.1Z) + ε`.
/// Marginal effects are `β₁ = 0.4`, `β₂ = 0.55`.
pub fn consistency_study_config() -> GenerativeConfig {
    let t_points = 15;
    GenerativeConfig {
        covariate: Some(CovariateModel {
            values: vec![0.0, 1.0, 2.0],
            level_shift: vec![0.2, 0.5, 0.4],
            effect_slope: vec![0.3, 0.1],
        }),
        ..GenerativeConfig::gm0(
            vec![vec![0.2, 0.5, 0.3]; t_points],
            vec![1.0; t_points],
            vec![0.0; t_points],
            vec![vec![0.1, 0.45]; t_points],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(family: Family) -> GenerativeConfig {
        GenerativeConfig {
            family,
            ..GenerativeConfig::gm0(
                vec![vec![0.4, 0.3, 0.3]; 5],
                vec![0.8; 5],
                vec![1.0; 5],
                vec![vec![0.2, 0.5]; 5],
            )
        }
    }

    #[test]
    fn gm_ev_scale_examples() {
        let (r, s) = gm_ev_scales(0.0, 0.2, &[0.4, 0.3, 0.3], 1, 3).unwrap();
        assert_eq!(r, 1.0);
        assert!((s[0] - 1.0).abs() < 1e-15);
        assert!((s[1] - 1.2f64.sqrt()).abs() < 1e-15);
        assert!((s[2] - 0.8f64.sqrt()).abs() < 1e-15);
        let second: f64 = [0.4, 0.3, 0.3].iter().zip(&s).map(|(p, v)| p * v * v).sum();
        assert!((second - 1.0).abs() < 1e-12);

        let r: Vec<f64> = (1..=3).map(|t| gm_ev_scales(0.5, 0.0, &[0.4, 0.3, 0.3], t, 3).unwrap().0).collect();
        assert!((r[0] - 1.5f64.sqrt()).abs() < 1e-15 && (r[1] - 1.0).abs() < 1e-15);
        assert!((r[2] - 0.5f64.sqrt()).abs() < 1e-15);

        let (r, s) = gm_ev_scales(0.0, 0.0, &[0.4, 0.3, 0.3], 2, 3).unwrap();
        assert_eq!((r, s), (1.0, vec![1.0; 3]));
        assert!(gm_ev_scales(1.5, 0.0, &[0.4, 0.3, 0.3], 3, 3).is_err());
        assert!(gm_ev_scales(0.0, 0.0, &[0.5, 0.5], 1, 3).is_err());
    }

    #[test]
    fn nu0_identity() {
        let c = GenerativeConfig { nu1: 0.6, ..small(Family::GmSc) };
        assert!((c.nu0() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn same_seed_same_data() {
        for family in [Family::Gm0, Family::GmEv, Family::GmSc, Family::GmEa] {
            let c = GenerativeConfig { nu1: 0.3, nu2: 0.1, nu3: 0.1, theta_r: 0.2, theta_s: 0.1, ..small(family) };
            let a = simulate_trial(&c, 20, 7).unwrap();
            let b = simulate_trial(&c, 20, 7).unwrap();
            assert_eq!(a, b);
            assert_ne!(a, simulate_trial(&c, 20, 8).unwrap());
            assert!(crate::data::validate(&a).is_clean());
        }
    }

    #[test]
    fn unavailable_points_are_untreated() {
        let d = simulate_trial(&small(Family::Gm0), 200, 1).unwrap();
        let recs = d.subjects().iter().flat_map(|s| &s.records);
        assert!(recs.clone().all(|r| r.available || r.treatment == 0));
        let rate = recs.clone().filter(|r| r.available).count() as f64 / 1000.0;
        assert!((rate - 0.8).abs() < 0.05, "{rate}");
    }

    #[test]
    fn gm_ea_clips_and_counts() {
        let c = GenerativeConfig { nu2: 0.2, nu3: 0.2, tau: vec![1.0; 5], ..small(Family::GmEa) };
        let (_, stats) = simulate_trial_with_stats(&c, 50, 3).unwrap();
        assert!(stats.clipped_probabilities > 0);
    }

    #[test]
    fn invalid_configs() {
        assert!(GenerativeConfig { nu1: 1.0, ..small(Family::GmSc) }.validate().is_err());
        let mut c = small(Family::GmEv);
        c.rand_probs = vec![vec![0.25; 4]; 5];
        c.k_arms = 3;
        c.effects = vec![vec![0.0; 3]; 5];
        assert!(c.validate().is_err());
    }

    #[test]
    fn consistency_model_emits_covariate() {
        let d = simulate_trial(&consistency_study_config(), 5, 11).unwrap();
        assert_eq!(d.feature_names(), ["z"]);
        assert!(d.subjects().iter().flat_map(|s| &s.records).all(|r| [0.0, 1.0, 2.0].contains(&r.features[0])));
    }
}
