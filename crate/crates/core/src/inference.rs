//! Linear contrasts, the Wald test with its scaled-F rejection rule, and
//! per-contrast confidence intervals.

use std::io::Read;

use crate::error::{Error, Result};
use crate::estimator::FitResult;
use crate::numerics::{f_quantile, f_sf, solve_spd, Matrix};

/// A hypothesis `L̃ β = 0` with `L̃ = L ⊗ I_p`.
#[derive(Debug, Clone)]
pub struct ContrastSpec {
    /// `ν x K`.
    pub l_matrix: Matrix,
    pub p: usize,
    /// `νp x Kp`.
    pub l_tilde: Matrix,
    pub rank_l: usize,
}

impl ContrastSpec {
    /// Degrees of freedom of the Wald statistic, `rank(L̃) = p · rank(L)`.
    pub fn df(&self) -> usize {
        self.rank_l * self.p
    }

    pub fn k_arms(&self) -> usize {
        self.l_matrix.cols()
    }

    /// Rows of `L̃` as coefficient vectors over `β̂`.
    pub fn coefficient_rows(&self) -> Vec<Vec<f64>> {
        self.l_tilde.to_rows()
    }

    /// Human-readable label for each row of `L̃`, e.g. `beta1 - beta2`.
    pub fn row_labels(&self, f_terms: &[String]) -> Vec<String> {
        let mut labels = Vec::new();
        for i in 0..self.l_matrix.rows() {
            let base = linear_combination_label(self.l_matrix.row(i));
            for f in f_terms.iter().take(self.p) {
                if self.p == 1 && f == "(Intercept)" {
                    labels.push(base.clone());
                } else {
                    labels.push(format!("({base}):{f}"));
                }
            }
        }
        labels
    }
}

fn linear_combination_label(coefs: &[f64]) -> String {
    let mut out = String::new();
    for (k, &c) in coefs.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let term = format!("beta{}", k + 1);
        let mag = c.abs();
        let body = if mag == 1.0 { term } else { format!("{mag}*{term}") };
        if out.is_empty() {
            out = if c < 0.0 { format!("-{body}") } else { body };
        } else {
            out.push_str(if c < 0.0 { " - " } else { " + " });
            out.push_str(&body);
        }
    }
    out
}

pub fn build_contrast(l_matrix: Matrix, p: usize) -> Result<ContrastSpec> {
    if p == 0 {
        return Err(Error::Invalid("moderator dimension p must be >= 1".into()));
    }
    if l_matrix.rows() == 0 || l_matrix.cols() == 0 || !l_matrix.is_finite() {
        return Err(Error::Invalid("contrast matrix must be non-empty and finite".into()));
    }
    let norm = l_matrix.max_abs();
    if norm == 0.0 {
        return Err(Error::ZeroContrast);
    }
    let rank_l = l_matrix.rank(1e-10 * norm);
    let l_tilde = l_matrix.kron(&Matrix::identity(p));
    Ok(ContrastSpec { l_matrix, p, l_tilde, rank_l })
}

/// Expands a named contrast: `all-null` (`L = I_K`) or `pairwise(j,k)`
/// (`e_j - e_k`, arms 1-based).
pub fn contrast_preset(name: &str, k_arms: usize) -> Result<Matrix> {
    let name = name.trim();
    if name == "all-null" {
        return Ok(Matrix::identity(k_arms));
    }
    let inner = name
        .strip_prefix("pairwise(")
        .and_then(|s| s.strip_suffix(')'))
        .ok_or_else(|| Error::Config(format!("unknown contrast preset `{name}`")))?;
    let arms: Vec<usize> = inner
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("bad arm list in `{name}`")))?;
    match arms.as_slice() {
        &[j, k] if j != k && (1..=k_arms).contains(&j) && (1..=k_arms).contains(&k) => {
            let mut row = vec![0.0; k_arms];
            row[j - 1] = 1.0;
            row[k - 1] = -1.0;
            Ok(Matrix::row_vector(&row))
        }
        _ => Err(Error::Config(format!(
            "`{name}` needs two distinct arms in 1..={k_arms}"
        ))),
    }
}

/// Reads a `ν x K` contrast matrix from headerless CSV.
pub fn read_contrast_csv<R: Read>(reader: R) -> Result<Matrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|c| {
                c.parse::<f64>().map_err(|_| Error::NonNumeric {
                    row: i + 1,
                    column: "contrast".into(),
                    value: c.to_owned(),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Matrix::from_rows(&rows)
}

/// Multiplier applied to `𝒯` before comparing with the F critical value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FScaling {
    /// `(n-q-l) / (l (n-q-l))`, which reduces to `1/l`.
    #[default]
    Printed,
    /// `(n-q-l) / (l (n-q-1))`.
    ResidualDf,
}

impl FScaling {
    pub fn factor(self, n: usize, q: usize, l: usize) -> f64 {
        let (n, q, l) = (n as f64, q as f64, l as f64);
        match self {
            FScaling::Printed => (n - q - l) / (l * (n - q - l)),
            FScaling::ResidualDf => (n - q - l) / (l * (n - q - 1.0)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub scaled_statistic: f64,
    pub df1: usize,
    pub df2: usize,
    pub p_value: f64,
    pub reject: bool,
    pub critical_value: f64,
    pub eta: f64,
}

pub fn wald_test(fit: &FitResult, contrast: &ContrastSpec, eta: f64) -> Result<TestResult> {
    wald_test_with(fit, contrast, eta, FScaling::Printed)
}

pub fn wald_test_with(
    fit: &FitResult,
    contrast: &ContrastSpec,
    eta: f64,
    scaling: FScaling,
) -> Result<TestResult> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::Domain(format!("test level must be in (0, 1), got {eta}")));
    }
    if contrast.k_arms() != fit.k_arms || contrast.p != fit.p {
        return Err(Error::Invalid(format!(
            "contrast is for K = {}, p = {} but the fit has K = {}, p = {}",
            contrast.k_arms(),
            contrast.p,
            fit.k_arms,
            fit.p
        )));
    }
    let l = contrast.df();
    if fit.n <= fit.q + l + 1 {
        return Err(Error::InsufficientSample { n: fit.n, required: fit.q + l + 1 });
    }
    let df2 = fit.n - fit.q - l;
    let lb = contrast.l_tilde.matvec(&fit.beta_hat);
    let lcl = contrast
        .l_tilde
        .matmul(&fit.cov_beta)
        .matmul(&contrast.l_tilde.transpose())
        .symmetrize();
    let solved = solve_spd(&lcl, &lb).map_err(|e| match e {
        Error::Singular(msg) => Error::Singular(format!(
            "contrasted covariance L~ C L~' is singular ({msg}); remove redundant contrast rows"
        )),
        other => other,
    })?;
    // 𝒯 = n (L̃β̂)ᵀ (L̃ [n cov] L̃ᵀ)⁻¹ (L̃β̂) = (L̃β̂)ᵀ (L̃ cov L̃ᵀ)⁻¹ (L̃β̂)
    let statistic: f64 = lb.iter().zip(&solved.solution).map(|(a, b)| a * b).sum::<f64>().max(0.0);
    let scaled = scaling.factor(fit.n, fit.q, l) * statistic;
    let critical_value = f_quantile(l as f64, df2 as f64, 1.0 - eta)?;
    let p_value = f_sf(l as f64, df2 as f64, scaled)?;
    Ok(TestResult {
        statistic,
        scaled_statistic: scaled,
        df1: l,
        df2,
        p_value,
        reject: scaled > critical_value,
        critical_value,
        eta,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalRow {
    pub estimate: f64,
    pub se: f64,
    pub lo: f64,
    pub hi: f64,
    pub p_value: f64,
}

/// Intervals `cᵀβ̂ ± sqrt(F⁻¹_{1, n-q-1}(1-η)) · se` for each coefficient row `c`.
pub fn confidence_intervals(fit: &FitResult, rows: &[Vec<f64>], eta: f64) -> Result<Vec<IntervalRow>> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::Domain(format!("interval level must be in (0, 1), got {eta}")));
    }
    if fit.n <= fit.q + 2 {
        return Err(Error::InsufficientSample { n: fit.n, required: fit.q + 2 });
    }
    let df2 = (fit.n - fit.q - 1) as f64;
    let multiplier = f_quantile(1.0, df2, 1.0 - eta)?.sqrt();
    rows.iter()
        .map(|c| {
            if c.len() != fit.beta_hat.len() {
                return Err(Error::Invalid(format!(
                    "contrast row has length {}, expected {}",
                    c.len(),
                    fit.beta_hat.len()
                )));
            }
            if c.iter().all(|&v| v == 0.0) {
                return Err(Error::ZeroContrast);
            }
            let estimate: f64 = c.iter().zip(&fit.beta_hat).map(|(a, b)| a * b).sum();
            let var: f64 = fit.cov_beta.matvec(c).iter().zip(c).map(|(a, b)| a * b).sum();
            if !(var > 0.0) {
                return Err(Error::Singular("contrast has zero estimated variance".into()));
            }
            let se = var.sqrt();
            let z = estimate / se;
            Ok(IntervalRow {
                estimate,
                se,
                lo: estimate - multiplier * se,
                hi: estimate + multiplier * se,
                p_value: f_sf(1.0, df2, z * z)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::test_support::panel;
    use crate::data::NumeratorPolicy;
    use crate::estimator::{fit_wcls, Correction, ModelSpec};

    fn toy_fit() -> FitResult {
        let d = panel(
            &[vec![1], vec![0], vec![1], vec![0]],
            &[vec![2.0], vec![1.0], vec![4.0], vec![3.0]],
            &[0.5, 0.5],
        );
        let spec = ModelSpec {
            numerator: NumeratorPolicy::EmpiricalPerT,
            correction: Correction::None,
            ..ModelSpec::default()
        };
        fit_wcls(&d, &spec).unwrap()
    }

    #[test]
    fn contrast_kron_and_rank() {
        let c = build_contrast(Matrix::row_vector(&[1.0, -1.0]), 2).unwrap();
        assert_eq!(
            c.l_tilde,
            Matrix::from_rows(&[vec![1.0, 0.0, -1.0, 0.0], vec![0.0, 1.0, 0.0, -1.0]]).unwrap()
        );
        assert_eq!((c.rank_l, c.df()), (1, 2));
        let c = build_contrast(Matrix::identity(3), 1).unwrap();
        assert_eq!(c.l_tilde, Matrix::identity(3));
        assert_eq!(c.rank_l, 3);
        assert!(matches!(build_contrast(Matrix::zeros(1, 2), 1), Err(Error::ZeroContrast)));
    }

    #[test]
    fn presets() {
        assert_eq!(contrast_preset("pairwise(1,2)", 3).unwrap(), Matrix::row_vector(&[1.0, -1.0, 0.0]));
        assert_eq!(contrast_preset("all-null", 2).unwrap(), Matrix::identity(2));
        assert!(contrast_preset("pairwise(1,4)", 3).is_err());
        assert!(contrast_preset("pairwise(2,2)", 3).is_err());
        assert!(contrast_preset("bogus", 3).is_err());
        let c = build_contrast(contrast_preset("pairwise(1,2)", 2).unwrap(), 1).unwrap();
        assert_eq!(c.row_labels(&["(Intercept)".into()]), vec!["beta1 - beta2"]);
    }

    #[test]
    fn contrast_from_csv() {
        let m = read_contrast_csv("1,0\n0,1\n".as_bytes()).unwrap();
        assert_eq!(m, Matrix::identity(2));
        assert!(read_contrast_csv("1,x\n".as_bytes()).is_err());
    }

    #[test]
    fn printed_factor_is_one_over_l() {
        assert!((FScaling::Printed.factor(93, 1, 1) - 1.0).abs() < 1e-15);
        assert!((FScaling::Printed.factor(50, 2, 2) - 0.5).abs() < 1e-15);
        assert!((FScaling::ResidualDf.factor(50, 2, 2) - 46.0 / (2.0 * 47.0)).abs() < 1e-15);
    }

    #[test]
    fn null_statistic_when_contrast_estimate_is_zero() {
        let mut fit = toy_fit();
        fit.beta_hat = vec![0.0];
        let c = build_contrast(Matrix::identity(1), 1).unwrap();
        let r = wald_test(&fit, &c, 0.05).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert!(!r.reject);
    }

    #[test]
    fn single_df_test_on_toy() {
        let fit = toy_fit();
        let c = build_contrast(Matrix::identity(1), 1).unwrap();
        let r = wald_test(&fit, &c, 0.05).unwrap();
        // β̂ = 1, var = 1  =>  𝒯 = 1, df = (1, 4 - 1 - 1)
        assert!((r.statistic - 1.0).abs() < 1e-12);
        assert_eq!(r.scaled_statistic, r.statistic);
        assert_eq!((r.df1, r.df2), (1, 2));
        let expected = f_sf(1.0, 2.0, 1.0).unwrap();
        assert!((r.p_value - expected).abs() < 1e-14);
        assert_eq!(r.reject, r.scaled_statistic > r.critical_value);
    }

    #[test]
    fn intervals_on_toy() {
        let fit = toy_fit();
        let rows = confidence_intervals(&fit, &[vec![1.0]], 0.05).unwrap();
        assert!((rows[0].estimate - 1.0).abs() < 1e-12);
        assert!(rows[0].lo < rows[0].estimate && rows[0].estimate < rows[0].hi);
        assert!(matches!(confidence_intervals(&fit, &[vec![0.0]], 0.05), Err(Error::ZeroContrast)));
    }
}
