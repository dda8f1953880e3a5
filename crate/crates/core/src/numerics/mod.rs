//! Dense linear algebra and special-function kernels.

mod matrix;
mod special;

pub use matrix::{
    solve_general, solve_spd, spd_factor, spd_inverse, Cholesky, Matrix, SpdSolveReport,
    SINGULAR_CONDITION,
};
pub use special::{
    f_cdf, f_quantile, f_sf, ln_beta, ln_gamma, noncentral_f_cdf, reg_inc_beta,
};

/// Kronecker product; block `(i, j)` equals `a[i, j] * b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    a.kron(b)
}
