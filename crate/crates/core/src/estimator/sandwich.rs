use super::design::DesignRows;
use crate::numerics::{spd_factor, spd_inverse, Matrix};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Correction {
    None,
    /// Residuals inflated by `(I - H_i)^{-1}` with the per-subject hat block.
    #[default]
    ManclDerouen,
}

impl std::str::FromStr for Correction {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "none" => Ok(Correction::None),
            "mancl_derouen" => Ok(Correction::ManclDerouen),
            other => Err(crate::error::Error::Config(format!(
                "unknown correction `{other}` (expected mancl_derouen or none)"
            ))),
        }
    }
}

impl Correction {
    pub fn name(self) -> &'static str {
        match self {
            Correction::None => "none",
            Correction::ManclDerouen => "mancl_derouen",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SandwichEstimate {
    /// `(1/n) M̂⁻¹ Σ̂ M̂⁻¹`, the covariance of `β̂`.
    pub cov_beta: Matrix,
    pub bread: Matrix,
    pub meat: Matrix,
    /// Subjects whose `I - H_i` was singular and kept their raw residuals.
    pub correction_fallbacks: usize,
}

/// Sandwich covariance of `β̂` from the fitted design.
///
/// `residuals` holds one slice per subject aligned with
/// [`DesignRows::subject`]. `normal` is the full joint matrix
/// `Σ_i D̃_iᵀ W_i D̃_i`, used only by the small-sample correction.
pub fn sandwich_variance(
    design: &DesignRows,
    residuals: &[Vec<f64>],
    normal: &Matrix,
    correction: Correction,
) -> Result<SandwichEstimate> {
    let q = design.q;
    let kp = design.k_arms * design.p;
    let n = design.n_subjects as f64;

    let mut bread = Matrix::zeros(kp, kp);
    for row in &design.rows {
        if row.weight != 0.0 {
            let d = row.d_beta(q);
            bread.add_outer(row.weight, d, d);
        }
    }
    let bread = bread.scale(1.0 / n);

    let mut meat = Matrix::zeros(kp, kp);
    let mut fallbacks = 0;
    for i in 0..design.n_subjects {
        let rows = design.subject(i);
        let raw = &residuals[i];
        let adjusted = match correction {
            Correction::None => None,
            Correction::ManclDerouen => {
                let adj = leverage_adjusted(design, i, raw, normal);
                if adj.is_none() {
                    fallbacks += 1;
                }
                adj
            }
        };
        let e = adjusted.as_deref().unwrap_or(raw);
        let mut score = vec![0.0; kp];
        for (row, &r) in rows.iter().zip(e) {
            if row.weight == 0.0 {
                continue;
            }
            for (s, d) in score.iter_mut().zip(row.d_beta(q)) {
                *s += row.weight * r * d;
            }
        }
        meat.add_outer(1.0, &score, &score);
    }
    let meat = meat.scale(1.0 / n);

    let bread_inv = spd_inverse(&bread)?;
    let cov_beta = bread_inv.matmul(&meat).matmul(&bread_inv).scale(1.0 / n).symmetrize();
    Ok(SandwichEstimate {
        cov_beta,
        bread,
        meat,
        correction_fallbacks: fallbacks,
    })
}

/// `(I - H_i)^{-1} e_i` with `H_i = D̃_i B⁻¹ D̃_iᵀ W_i`, via Woodbury:
/// `e_i + D̃_i (B - D̃_iᵀ W_i D̃_i)⁻¹ D̃_iᵀ W_i e_i`.
fn leverage_adjusted(design: &DesignRows, i: usize, e: &[f64], normal: &Matrix) -> Option<Vec<f64>> {
    let rows = design.subject(i);
    let dim = design.dim();
    let mut own = Matrix::zeros(dim, dim);
    let mut moment = vec![0.0; dim];
    for (row, &r) in rows.iter().zip(e) {
        if row.weight == 0.0 {
            continue;
        }
        own.add_outer(row.weight, &row.d_full, &row.d_full);
        for (m, d) in moment.iter_mut().zip(&row.d_full) {
            *m += row.weight * r * d;
        }
    }
    let rest = normal.sub(&own).symmetrize();
    let (chol, _, _) = spd_factor(&rest).ok()?;
    let z = chol.solve(&moment);
    Some(
        rows.iter()
            .zip(e)
            .map(|(row, &r)| r + row.d_full.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>())
            .collect(),
    )
}
