//! Weighted and centered least squares for categorical treatments.
//!
//! The estimating equation is linear in `(α, β)`, so the fit is a single
//! symmetric solve of the weighted normal equations. The covariance of `β̂`
//! is the sandwich `M̂⁻¹ Σ̂ M̂⁻¹ / n` built from the treatment block `D_t`
//! only, optionally with leverage-adjusted residuals.

mod design;
mod sandwich;

pub use design::{build_design_rows, DesignRow, DesignRows};
pub use sandwich::{sandwich_variance, Correction, SandwichEstimate};

use crate::data::{fit_numerator_probs, MrtDataset, NumeratorPolicy, NumeratorTable};
use crate::error::{Error, Result};
use crate::numerics::{solve_spd, Matrix};

/// Columns of `f_t` or `g_t`, with an optional leading intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub intercept: bool,
    pub columns: Vec<String>,
}

impl FeatureSet {
    pub fn intercept_only() -> Self {
        Self { intercept: true, columns: vec![] }
    }

    pub fn with_intercept(columns: &[&str]) -> Self {
        Self {
            intercept: true,
            columns: columns.iter().map(|c| c.to_string()).collect(),
        }
    }

    pub fn without_intercept(columns: &[&str]) -> Self {
        Self {
            intercept: false,
            columns: columns.iter().map(|c| c.to_string()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        usize::from(self.intercept) + self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn term_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.len());
        if self.intercept {
            names.push("(Intercept)".to_owned());
        }
        names.extend(self.columns.iter().cloned());
        names
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    /// Moderators `f_t(S_t)`.
    pub f: FeatureSet,
    /// Controls `g_t(H_t)`.
    pub g: FeatureSet,
    pub delta: usize,
    pub numerator: NumeratorPolicy,
    pub correction: Correction,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            f: FeatureSet::intercept_only(),
            g: FeatureSet::intercept_only(),
            delta: 1,
            numerator: NumeratorPolicy::MatchRandomization,
            correction: Correction::ManclDerouen,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub alpha_hat: Vec<f64>,
    /// `(β_1; ...; β_K)`, each of length `p`.
    pub beta_hat: Vec<f64>,
    pub cov_beta: Matrix,
    pub n: usize,
    pub t_points: usize,
    pub k_arms: usize,
    pub p: usize,
    pub q: usize,
    pub delta: usize,
    /// `r_t(α̂, β̂)` per subject, for `t = 0..T-Δ+1`.
    pub residuals: Vec<Vec<f64>>,
    pub correction: Correction,
    pub correction_fallbacks: usize,
    pub numerator: NumeratorTable,
    pub f_terms: Vec<String>,
    pub g_terms: Vec<String>,
}

impl FitResult {
    pub fn beta_k(&self, k: usize) -> &[f64] {
        &self.beta_hat[(k - 1) * self.p..k * self.p]
    }

    /// Names of the `Kp` entries of `β̂`, e.g. `beta1` or `beta2:t`.
    pub fn beta_terms(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.k_arms * self.p);
        for k in 1..=self.k_arms {
            for f in &self.f_terms {
                if self.p == 1 && f == "(Intercept)" {
                    names.push(format!("beta{k}"));
                } else {
                    names.push(format!("beta{k}:{f}"));
                }
            }
        }
        names
    }

    pub fn standard_errors(&self) -> Vec<f64> {
        (0..self.beta_hat.len())
            .map(|j| self.cov_beta[(j, j)].max(0.0).sqrt())
            .collect()
    }
}

/// Weighted normal equations `Σ w d dᵀ θ = Σ w d Y` over the joint design.
pub fn normal_equations(design: &DesignRows) -> (Matrix, Vec<f64>) {
    let dim = design.dim();
    let mut normal = Matrix::zeros(dim, dim);
    let mut rhs = vec![0.0; dim];
    for row in &design.rows {
        if row.weight == 0.0 {
            continue;
        }
        normal.add_outer(row.weight, &row.d_full, &row.d_full);
        for (b, d) in rhs.iter_mut().zip(&row.d_full) {
            *b += row.weight * row.outcome * d;
        }
    }
    (normal, rhs)
}

/// `𝔓_n m(α, β)`: the estimating function averaged over subjects.
pub fn estimating_function_mean(design: &DesignRows, alpha: &[f64], beta: &[f64]) -> Vec<f64> {
    let theta: Vec<f64> = alpha.iter().chain(beta).copied().collect();
    let mut out = vec![0.0; design.dim()];
    for row in &design.rows {
        if row.weight == 0.0 {
            continue;
        }
        let fitted: f64 = row.d_full.iter().zip(&theta).map(|(a, b)| a * b).sum();
        let r = row.outcome - fitted;
        for (o, d) in out.iter_mut().zip(&row.d_full) {
            *o += row.weight * r * d;
        }
    }
    let n = design.n_subjects as f64;
    out.iter_mut().for_each(|v| *v /= n);
    out
}

pub fn fit_wcls(data: &MrtDataset, spec: &ModelSpec) -> Result<FitResult> {
    let numerator = fit_numerator_probs(data, &spec.numerator)?;
    let design = build_design_rows(data, spec, &numerator)?;
    fit_design(&design, spec, numerator)
}

/// Fits from already-built design rows.
pub fn fit_design(design: &DesignRows, spec: &ModelSpec, numerator: NumeratorTable) -> Result<FitResult> {
    let (q, p, k_arms) = (design.q, design.p, design.k_arms);
    let dim = design.dim();
    if design.n_subjects <= dim {
        return Err(Error::InsufficientSample { n: design.n_subjects, required: dim });
    }
    for k in 1..=k_arms {
        if !design.rows.iter().any(|r| r.weight > 0.0 && r.treatment == k) {
            return Err(Error::Singular(format!(
                "arm {k} is never observed with positive weight; its effect is not identified"
            )));
        }
    }
    let (normal, rhs) = normal_equations(design);
    let theta = solve_spd(&normal, &rhs)
        .map_err(|e| match e {
            Error::Singular(msg) => Error::Singular(format!(
                "normal matrix of the estimating equation is singular ({msg}); check for \
                 constant or collinear f/g columns"
            )),
            other => other,
        })?
        .solution;

    let residuals: Vec<Vec<f64>> = (0..design.n_subjects)
        .map(|i| {
            design
                .subject(i)
                .iter()
                .map(|row| row.outcome - row.d_full.iter().zip(&theta).map(|(a, b)| a * b).sum::<f64>())
                .collect()
        })
        .collect();
    let sandwich = sandwich_variance(design, &residuals, &normal, spec.correction)?;

    Ok(FitResult {
        alpha_hat: theta[..q].to_vec(),
        beta_hat: theta[q..].to_vec(),
        cov_beta: sandwich.cov_beta,
        n: design.n_subjects,
        t_points: numerator.rows().len(),
        k_arms,
        p,
        q,
        delta: spec.delta,
        residuals,
        correction: spec.correction,
        correction_fallbacks: sandwich.correction_fallbacks,
        numerator,
        f_terms: spec.f.term_names(),
        g_terms: spec.g.term_names(),
    })
}
