//! Sample-size calculation for MRTs with categorical treatments, the power
//! function it inverts, standardized effect summaries, and the parametric
//! time patterns used to describe availability, expected outcome, and
//! marginal excursion effects.
//!
//! Everything here is on the standardized scale: `γ` holds sMEE
//! coefficients, so the noise scale `σ̄` cancels out of `λ(n)`.

use std::str::FromStr;

use crate::config::{KeyValueConfig, Sweep};
use crate::error::{Error, Result};
use crate::inference::{build_contrast, ContrastSpec};
use crate::numerics::{f_quantile, noncentral_f_cdf, solve_general, solve_spd, spd_inverse, Matrix};

/// Largest `n` the search will consider unless overridden.
pub const DEFAULT_N_CAP: usize = 1_000_000;

/// Inputs of the sample-size calculator.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignInputs {
    pub k_arms: usize,
    pub t_points: usize,
    /// `T x K`: `p_t(k)` for the active arms; `p_t(0)` is implied.
    pub rand_probs: Vec<Vec<f64>>,
    /// `τ(t)`, length `T`.
    pub tau: Vec<f64>,
    /// `T x p`: `f_t`.
    pub f: Vec<Vec<f64>>,
    /// `(γ_1; ...; γ_K)`, length `Kp`.
    pub gamma: Vec<f64>,
    /// Dimension of `g_t`.
    pub q: usize,
    /// `ν x K` contrast.
    pub l_matrix: Matrix,
    pub eta: f64,
    pub power_target: f64,
    pub n_cap: usize,
}

impl DesignInputs {
    pub fn p(&self) -> usize {
        self.f.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        let (k, t_points, p) = (self.k_arms, self.t_points, self.p());
        if k == 0 || t_points == 0 || p == 0 || self.q == 0 {
            return Err(Error::Invalid("K, T, p and q must all be >= 1".into()));
        }
        if self.rand_probs.len() != t_points || self.rand_probs.iter().any(|r| r.len() != k) {
            return Err(Error::Invalid(format!("randomization probabilities must be {t_points} x {k}")));
        }
        for (t, row) in self.rand_probs.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&v| !(v > 0.0)) || !(sum < 1.0) {
                return Err(Error::Invalid(format!(
                    "t = {}: active-arm probabilities must be positive and sum to < 1",
                    t + 1
                )));
            }
        }
        if self.tau.len() != t_points || self.tau.iter().any(|&v| !(v > 0.0 && v <= 1.0)) {
            return Err(Error::Invalid("availability τ(t) must have length T with values in (0, 1]".into()));
        }
        if self.f.len() != t_points || self.f.iter().any(|r| r.len() != p || r.iter().any(|v| !v.is_finite())) {
            return Err(Error::Invalid(format!("f must be a finite {t_points} x {p} matrix")));
        }
        if self.gamma.len() != k * p || self.gamma.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("γ must be a finite vector of length K*p = {}", k * p)));
        }
        if self.l_matrix.cols() != k {
            return Err(Error::Invalid(format!("contrast L must have K = {k} columns")));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::Domain(format!("type I level must be in (0, 1), got {}", self.eta)));
        }
        if !(self.power_target >= 0.0 && self.power_target < 1.0) {
            return Err(Error::Domain(format!("power target must be in [0, 1), got {}", self.power_target)));
        }
        Ok(())
    }

    pub fn contrast(&self) -> Result<ContrastSpec> {
        build_contrast(self.l_matrix.clone(), self.p())
    }

    /// Smallest `n` the search considers: `df₂ = n - q - l ≥ 2`, and at least 10.
    pub fn n_start(&self) -> Result<usize> {
        Ok(10.max(self.q + self.contrast()?.df() + 2))
    }
}

/// `P_t = diag(p) - p pᵀ` over the active arms.
pub fn build_pt(probs: &[f64]) -> Result<Matrix> {
    let sum: f64 = probs.iter().sum();
    if probs.is_empty() || probs.iter().any(|&p| !(p > 0.0)) || !(sum < 1.0) {
        return Err(Error::Invalid(
            "active-arm probabilities must be positive and sum to < 1".into(),
        ));
    }
    let k = probs.len();
    let mut m = Matrix::diag(probs);
    m.add_outer(-1.0, probs, probs);
    debug_assert_eq!(m.rows(), k);
    Ok(m)
}

/// `V = Σ_t τ(t) P_t ⊗ f_t f_tᵀ`.
pub fn build_v(inputs: &DesignInputs) -> Result<Matrix> {
    inputs.validate()?;
    let (k, p) = (inputs.k_arms, inputs.p());
    let mut v = Matrix::zeros(k * p, k * p);
    for t in 0..inputs.t_points {
        let pt = build_pt(&inputs.rand_probs[t])?;
        let f = &inputs.f[t];
        let mut fft = Matrix::zeros(p, p);
        fft.add_outer(1.0, f, f);
        v = v.add(&pt.kron(&fft).scale(inputs.tau[t]));
    }
    // Surface singularity here rather than deep inside the search.
    spd_inverse(&v).map_err(|e| match e {
        Error::Singular(msg) => Error::Singular(format!(
            "V is singular ({msg}); the f_t vectors do not span R^p"
        )),
        other => other,
    })?;
    Ok(v)
}

/// `λ(n) / n = (L̃γ)ᵀ (L̃ V⁻¹ L̃ᵀ)⁻¹ (L̃γ)`.
fn lambda_per_n(inputs: &DesignInputs, v: &Matrix, contrast: &ContrastSpec) -> Result<f64> {
    let lg = contrast.l_tilde.matvec(&inputs.gamma);
    let scale = inputs.gamma.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    if lg.iter().all(|x| x.abs() <= 1e-14 * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::NullContrast);
    }
    let v_inv = spd_inverse(v)?;
    let middle = contrast
        .l_tilde
        .matmul(&v_inv)
        .matmul(&contrast.l_tilde.transpose())
        .symmetrize();
    let solved = solve_spd(&middle, &lg).map_err(|e| match e {
        Error::Singular(msg) => Error::Singular(format!(
            "L~ V^-1 L~' is singular ({msg}); remove redundant contrast rows"
        )),
        other => other,
    })?;
    Ok(lg.iter().zip(&solved.solution).map(|(a, b)| a * b).sum())
}

pub fn noncentrality(n: usize, inputs: &DesignInputs) -> Result<f64> {
    let v = build_v(inputs)?;
    let contrast = inputs.contrast()?;
    Ok(n as f64 * lambda_per_n(inputs, &v, &contrast)?)
}

fn power_from_parts(lpn: f64, n: usize, q: usize, l: usize, eta: f64) -> Result<f64> {
    if n <= q + l + 1 {
        return Err(Error::InsufficientSample { n, required: q + l + 2 });
    }
    let (d1, d2) = (l as f64, (n - q - l) as f64);
    let critical = f_quantile(d1, d2, 1.0 - eta)?;
    Ok((1.0 - noncentral_f_cdf(d1, d2, n as f64 * lpn, critical)?).clamp(0.0, 1.0))
}

/// Power of the level-`η` test at `n` subjects under the target alternative.
pub fn power_at_n(inputs: &DesignInputs, n: usize) -> Result<f64> {
    let v = build_v(inputs)?;
    let contrast = inputs.contrast()?;
    let lpn = lambda_per_n(inputs, &v, &contrast)?;
    power_from_parts(lpn, n, inputs.q, contrast.df(), inputs.eta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSizeResult {
    pub n: usize,
    pub achieved_power: f64,
    pub lambda_per_n: f64,
    pub v: Matrix,
}

/// Smallest `n ≥ max(10, q + l + 2)` whose power reaches the target.
///
/// Power is increasing in `n` (`λ` grows linearly and `df₂` grows), so the
/// search brackets by doubling and then bisects.
pub fn required_sample_size(inputs: &DesignInputs) -> Result<SampleSizeResult> {
    let v = build_v(inputs)?;
    let contrast = inputs.contrast()?;
    let lpn = lambda_per_n(inputs, &v, &contrast)?;
    let (q, l, eta, target) = (inputs.q, contrast.df(), inputs.eta, inputs.power_target);
    let power = |n: usize| power_from_parts(lpn, n, q, l, eta);
    let start = inputs.n_start()?;
    let cap = inputs.n_cap.max(start);

    let p0 = power(start)?;
    if p0 >= target {
        return Ok(SampleSizeResult { n: start, achieved_power: p0, lambda_per_n: lpn, v });
    }
    let (mut lo, mut hi) = (start, start);
    let mut p_hi = p0;
    while p_hi < target {
        if hi >= cap {
            return Err(Error::EffectTooSmall { cap });
        }
        lo = hi;
        hi = (hi.saturating_mul(2)).min(cap);
        p_hi = power(hi)?;
    }
    // Invariant: power(lo) < target <= power(hi).
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let pm = power(mid)?;
        if pm >= target {
            hi = mid;
            p_hi = pm;
        } else {
            lo = mid;
        }
    }
    Ok(SampleSizeResult { n: hi, achieved_power: p_hi, lambda_per_n: lpn, v })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TauKind {
    Constant,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EoKind {
    Constant,
    Linear,
    Quadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeeKind {
    Constant,
    Linear,
}

macro_rules! kind_from_str {
    ($ty:ident { $($name:literal => $variant:ident),* $(,)? }) => {
        impl $ty {
            pub fn name(self) -> &'static str {
                match self {
                    $($ty::$variant => $name,)*
                }
            }
        }

        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.trim() {
                    $($name => Ok($ty::$variant),)*
                    other => Err(Error::Config(format!(
                        "unknown {} `{other}` (expected one of: {})",
                        stringify!($ty),
                        [$($name),*].join(", ")
                    ))),
                }
            }
        }
    };
}

kind_from_str!(TauKind { "constant" => Constant, "linear" => Linear });
kind_from_str!(EoKind { "constant" => Constant, "linear" => Linear, "quadratic" => Quadratic });
kind_from_str!(MeeKind { "constant" => Constant, "linear" => Linear });

impl EoKind {
    pub fn degree(self) -> usize {
        match self {
            EoKind::Constant => 0,
            EoKind::Linear => 1,
            EoKind::Quadratic => 2,
        }
    }
}

impl MeeKind {
    pub fn degree(self) -> usize {
        match self {
            MeeKind::Constant => 0,
            MeeKind::Linear => 1,
        }
    }
}

/// `(1, t, t², ...)` up to `degree`, with `t` 1-based.
pub fn time_basis(degree: usize, t1: usize) -> Vec<f64> {
    let t = t1 as f64;
    (0..=degree).map(|d| t.powi(d as i32)).collect()
}

/// Column names matching [`time_basis`]; `t` and `t2` are resolved by the
/// estimator from the decision index.
pub fn time_basis_names(degree: usize) -> Vec<&'static str> {
    ["t", "t2"][..degree].to_vec()
}

/// `τ(t)`: constant `AA`, or linear from `AA + θ_τ` at `t = 1` to `AA - θ_τ` at `t = T`.
pub fn tau_pattern(kind: TauKind, aa: f64, theta_tau: f64, t_points: usize) -> Result<Vec<f64>> {
    if t_points == 0 {
        return Err(Error::Invalid("T must be >= 1".into()));
    }
    let tau: Vec<f64> = match kind {
        TauKind::Constant => vec![aa; t_points],
        TauKind::Linear if t_points == 1 => vec![aa],
        TauKind::Linear => (0..t_points)
            .map(|i| aa + theta_tau - 2.0 * theta_tau * i as f64 / (t_points - 1) as f64)
            .collect(),
    };
    if tau.iter().any(|&v| !(v > 0.0 && v <= 1.0 + 1e-12)) {
        return Err(Error::Invalid(format!(
            "availability pattern leaves (0, 1] (AA = {aa}, θ_τ = {theta_tau})"
        )));
    }
    Ok(tau.into_iter().map(|v| v.min(1.0)).collect())
}

/// Availability-weighted moments `Σ t^d τ(t) / Σ τ(t)` for `d = 0..=degree`.
fn weighted_time_moments(tau: &[f64], degree: usize) -> Vec<f64> {
    let total: f64 = tau.iter().sum();
    (0..=degree)
        .map(|d| {
            tau.iter()
                .enumerate()
                .map(|(i, w)| w * ((i + 1) as f64).powi(d as i32))
                .sum::<f64>()
                / total
        })
        .collect()
}

fn check_theta(name: &str, theta: f64) -> Result<()> {
    if theta.abs() < 1.0 {
        Ok(())
    } else {
        Err(Error::Invalid(format!("{name} must lie in (-1, 1), got {theta}")))
    }
}

fn solve_pattern(rows: Vec<Vec<f64>>, rhs: Vec<f64>, what: &str) -> Result<Vec<f64>> {
    solve_general(&Matrix::from_rows(&rows)?, &rhs).map_err(|e| match e {
        Error::Singular(_) => Error::Singular(format!(
            "{what} constraints are degenerate for this θ and T"
        )),
        other => other,
    })
}

fn evaluate(coeffs: &[f64], t_points: usize) -> Vec<f64> {
    (1..=t_points)
        .map(|t| {
            time_basis(coeffs.len() - 1, t)
                .iter()
                .zip(coeffs)
                .map(|(b, c)| b * c)
                .sum()
        })
        .collect()
}

/// Polynomial-in-`t` curve: coefficients on `(1, t, ...)` and its values.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub coeffs: Vec<f64>,
    pub values: Vec<f64>,
}

/// Expected outcome `EO(t)` with availability-weighted average `AEO`.
///
/// Linear: `EO(1)/EO(T) = (1+θ)/(1-θ)`. Quadratic: `EO(1) = EO(T)` and
/// `EO((T+1)/2)/EO(1) = (1+θ)/(1-θ)`. Ratios are imposed cross-multiplied.
pub fn eo_pattern(kind: EoKind, theta_g: f64, aeo: f64, tau: &[f64]) -> Result<Curve> {
    check_theta("θ_g", theta_g)?;
    let t_points = tau.len();
    let big_t = t_points as f64;
    let th = theta_g;
    let coeffs = match kind {
        EoKind::Constant => vec![aeo],
        EoKind::Linear => {
            let m = weighted_time_moments(tau, 1);
            solve_pattern(
                vec![vec![-2.0 * th, (1.0 - th) - (1.0 + th) * big_t], vec![1.0, m[1]]],
                vec![0.0, aeo],
                "linear EO",
            )?
        }
        EoKind::Quadratic => {
            let m = weighted_time_moments(tau, 2);
            let mid = (big_t + 1.0) / 2.0;
            solve_pattern(
                vec![
                    vec![0.0, 1.0 - big_t, 1.0 - big_t * big_t],
                    vec![
                        -2.0 * th,
                        mid * (1.0 - th) - (1.0 + th),
                        mid * mid * (1.0 - th) - (1.0 + th),
                    ],
                    vec![1.0, m[1], m[2]],
                ],
                vec![0.0, 0.0, aeo],
                "quadratic EO",
            )?
        }
    };
    let values = evaluate(&coeffs, t_points);
    Ok(Curve { coeffs, values })
}

fn linear_ratio_curve(theta: f64, target_avg: f64, tau: &[f64], what: &str) -> Result<Vec<f64>> {
    let m = weighted_time_moments(tau, 1);
    let big_t = tau.len() as f64;
    solve_pattern(
        vec![vec![-2.0 * theta, (1.0 - theta) - (1.0 + theta) * big_t], vec![1.0, m[1]]],
        vec![0.0, target_avg],
        what,
    )
}

/// Standardized marginal excursion effects, one curve per active arm.
#[derive(Debug, Clone, PartialEq)]
pub struct MeePattern {
    pub kind: MeeKind,
    /// `(γ_1; ...; γ_K)` on the basis `(1)` or `(1, t)`.
    pub gamma: Vec<f64>,
    /// `T x K`: `sMEE_k(t)`.
    pub curves: Vec<Vec<f64>>,
}

impl MeePattern {
    pub fn p(&self) -> usize {
        self.kind.degree() + 1
    }

    pub fn gamma_k(&self, k: usize) -> &[f64] {
        &self.gamma[(k - 1) * self.p()..k * self.p()]
    }
}

/// Two-arm builder: arm 1 is `β₁ + β₂t` with slope ratio `θ_f1`; arm 2 adds
/// `β₃ + β₄t` with slope ratio `θ_f2`. Each arm's availability-weighted
/// average matches its sATE.
pub fn mee_pattern(
    kind: MeeKind,
    theta_f1: f64,
    theta_f2: f64,
    sate: (f64, f64),
    tau: &[f64],
) -> Result<MeePattern> {
    mee_pattern_multi(kind, theta_f1, &[theta_f2], &[sate.0, sate.1], tau)
}

/// General-`K` builder: arm `k ≥ 2` is arm 1 plus its own linear offset
/// with slope ratio `theta_offsets[k-2]`.
pub fn mee_pattern_multi(
    kind: MeeKind,
    theta_f1: f64,
    theta_offsets: &[f64],
    sate: &[f64],
    tau: &[f64],
) -> Result<MeePattern> {
    let k_arms = sate.len();
    if k_arms == 0 || tau.is_empty() {
        return Err(Error::Invalid("need at least one arm and one decision point".into()));
    }
    let t_points = tau.len();
    let gamma = match kind {
        MeeKind::Constant => sate.to_vec(),
        MeeKind::Linear => {
            if theta_offsets.len() + 1 < k_arms {
                return Err(Error::Invalid(format!(
                    "linear effects for K = {k_arms} need {} offset slope parameters",
                    k_arms - 1
                )));
            }
            check_theta("θ_f1", theta_f1)?;
            let base = linear_ratio_curve(theta_f1, sate[0], tau, "arm-1 effect")?;
            let mut gamma = base.clone();
            for k in 1..k_arms {
                let th = theta_offsets[k - 1];
                check_theta(&format!("θ_f{}", k + 1), th)?;
                let offset = linear_ratio_curve(th, sate[k] - sate[0], tau, "arm-offset effect")?;
                gamma.extend([base[0] + offset[0], base[1] + offset[1]]);
            }
            gamma
        }
    };
    let p = kind.degree() + 1;
    let per_arm: Vec<Vec<f64>> = (0..k_arms).map(|k| evaluate(&gamma[k * p..(k + 1) * p], t_points)).collect();
    let curves = (0..t_points).map(|t| per_arm.iter().map(|c| c[t]).collect()).collect();
    Ok(MeePattern { kind, gamma, curves })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectSummary {
    pub sate: Vec<f64>,
    pub delta_sate: Vec<f64>,
    pub aeo: f64,
    pub aa: f64,
}

/// Availability-weighted averages of effect and outcome curves.
pub fn summarize_effects(smee: &[Vec<f64>], eo: &[f64], tau: &[f64], l_matrix: &Matrix) -> Result<EffectSummary> {
    let t_points = tau.len();
    let k = l_matrix.cols();
    if t_points == 0 || smee.len() != t_points || eo.len() != t_points || smee.iter().any(|r| r.len() != k) {
        return Err(Error::Invalid("effect curves, EO, τ and L dimensions disagree".into()));
    }
    let total: f64 = tau.iter().sum();
    let sate: Vec<f64> = (0..k)
        .map(|j| smee.iter().zip(tau).map(|(r, w)| r[j] * w).sum::<f64>() / total)
        .collect();
    Ok(EffectSummary {
        delta_sate: l_matrix.matvec(&sate),
        sate,
        aeo: eo.iter().zip(tau).map(|(e, w)| e * w).sum::<f64>() / total,
        aa: total / t_points as f64,
    })
}

/// Randomization probabilities from a `p` list: either `K+1` values
/// including the reference arm (must sum to 1) or `K` active-arm values.
pub fn active_probs(p: &[f64], k_arms: usize) -> Result<Vec<f64>> {
    if p.len() == k_arms + 1 {
        if (p.iter().sum::<f64>() - 1.0).abs() > 1e-8 {
            return Err(Error::Invalid("probabilities do not sum to 1".into()));
        }
        Ok(p[1..].to_vec())
    } else if p.len() == k_arms {
        Ok(p.to_vec())
    } else {
        Err(Error::Invalid(format!(
            "`p` needs K+1 = {} values (reference arm first) or K = {k_arms} active-arm values",
            k_arms + 1
        )))
    }
}

/// Pattern-level description of a trial, shared by the calculator and the
/// simulator config.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialPatterns {
    pub k_arms: usize,
    pub t_points: usize,
    pub active_probs: Vec<f64>,
    pub tau: Vec<f64>,
    pub mee: MeePattern,
}

/// Reads `K, T, p, tau_kind, AA, theta_tau, f_kind, theta_f1, theta_f2,
/// sate1..sateK` (or `sate = a, b, ...`).
pub fn patterns_from_config(cfg: &KeyValueConfig) -> Result<TrialPatterns> {
    let k_arms: usize = cfg.require("K")?;
    let t_points: usize = cfg.require("T")?;
    if k_arms == 0 || t_points == 0 {
        return Err(Error::Config("K and T must be >= 1".into()));
    }
    let p = match cfg.get_list("p")? {
        Some(p) => active_probs(&p, k_arms)?,
        None => vec![1.0 / (k_arms + 1) as f64; k_arms],
    };
    let tau_kind: TauKind = cfg.get_or("tau_kind", "constant".to_owned())?.parse()?;
    let tau = tau_pattern(tau_kind, cfg.get_or("AA", 1.0)?, cfg.get_or("theta_tau", 0.0)?, t_points)?;
    let sate = match cfg.get_list("sate")? {
        Some(s) if s.len() == k_arms => s,
        Some(s) => {
            return Err(Error::Config(format!("`sate` has {} values, expected K = {k_arms}", s.len())))
        }
        None => (1..=k_arms)
            .map(|k| cfg.require::<f64>(&format!("sate{k}")))
            .collect::<Result<_>>()?,
    };
    let f_kind: MeeKind = cfg.get_or("f_kind", "constant".to_owned())?.parse()?;
    let theta_f1 = cfg.get_or("theta_f1", 0.0)?;
    let offsets = match cfg.get_list("theta_f2")? {
        Some(v) if v.len() == 1 => vec![v[0]; k_arms.saturating_sub(1)],
        Some(v) => v,
        None => vec![0.0; k_arms.saturating_sub(1)],
    };
    let mee = mee_pattern_multi(f_kind, theta_f1, &offsets, &sate, &tau)?;
    Ok(TrialPatterns { k_arms, t_points, active_probs: p, tau, mee })
}

/// Reads a full [`DesignInputs`] from config keys. `L` defaults to `I_K`.
pub fn design_inputs_from_config(cfg: &KeyValueConfig) -> Result<DesignInputs> {
    let pat = patterns_from_config(cfg)?;
    design_inputs_from_patterns(cfg, &pat, 1)
}

/// Completes [`DesignInputs`] from already-built patterns; `q` falls back to `default_q`.
pub fn design_inputs_from_patterns(cfg: &KeyValueConfig, pat: &TrialPatterns, default_q: usize) -> Result<DesignInputs> {
    let l_matrix = match cfg.get_matrix("L")? {
        Some(rows) => Matrix::from_rows(&rows)?,
        None => Matrix::identity(pat.k_arms),
    };
    let degree = pat.mee.kind.degree();
    let inputs = DesignInputs {
        k_arms: pat.k_arms,
        t_points: pat.t_points,
        rand_probs: vec![pat.active_probs.clone(); pat.t_points],
        tau: pat.tau.clone(),
        f: (1..=pat.t_points).map(|t| time_basis(degree, t)).collect(),
        gamma: pat.mee.gamma.clone(),
        q: cfg.get_or("q", default_q)?,
        l_matrix,
        eta: cfg.get_or("eta", 0.05)?,
        power_target: cfg.get_or("power", 0.8)?,
        n_cap: cfg.get_or("n_cap", DEFAULT_N_CAP)?,
    };
    inputs.validate()?;
    Ok(inputs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    /// Required `n`, or the reason the point has none.
    pub outcome: std::result::Result<SampleSizeResult, String>,
}

/// Recomputes the sample size with one key replaced by each swept value.
pub fn sample_size_sweep(cfg: &KeyValueConfig, sweep: &Sweep) -> Result<Vec<SweepPoint>> {
    let mut points = Vec::with_capacity(sweep.values.len());
    for &value in &sweep.values {
        let mut c = cfg.clone();
        c.set(&sweep.key, value.to_string());
        let outcome = design_inputs_from_config(&c)
            .and_then(|inputs| {
                c.finish()?;
                required_sample_size(&inputs)
            })
            .map_err(|e| e.to_string());
        points.push(SweepPoint { value, outcome });
    }
    Ok(points)
}
