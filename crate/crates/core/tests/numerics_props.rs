use mrt_cee::numerics::{f_cdf, f_quantile, noncentral_f_cdf, solve_spd, Matrix};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn spd(entries: &[f64], n: usize) -> Matrix {
    let a = Matrix::from_vec(n, n, entries.to_vec()).unwrap();
    a.transpose().matmul(&a).add(&Matrix::identity(n).scale(0.5))
}

proptest! {
    #[test]
    fn f_quantile_inverts_cdf(d1 in 1.0f64..20.0, d2 in 2.0f64..400.0, p in 0.001f64..0.999) {
        let x = f_quantile(d1, d2, p).unwrap();
        prop_assert!((f_cdf(d1, d2, x).unwrap() - p).abs() < 1e-10);
    }

    #[test]
    fn noncentral_cdf_is_monotone(d1 in 1.0f64..6.0, d2 in 5.0f64..200.0, lambda in 0.0f64..40.0, x in 0.1f64..10.0) {
        let lo = noncentral_f_cdf(d1, d2, lambda, x).unwrap();
        let hi = noncentral_f_cdf(d1, d2, lambda, x * 1.1).unwrap();
        let shifted = noncentral_f_cdf(d1, d2, lambda + 1.0, x).unwrap();
        prop_assert!(hi >= lo - 1e-14);
        prop_assert!(shifted <= lo + 1e-14, "CDF should decrease in the noncentrality");
    }

    #[test]
    fn central_limit_of_noncentral(d1 in 1.0f64..6.0, d2 in 5.0f64..200.0, x in 0.05f64..10.0) {
        let a = noncentral_f_cdf(d1, d2, 0.0, x).unwrap();
        prop_assert!((a - f_cdf(d1, d2, x).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn spd_solve_matches_nalgebra(entries in prop::collection::vec(-2.0f64..2.0, 16), rhs in prop::collection::vec(-5.0f64..5.0, 4)) {
        let a = spd(&entries, 4);
        let ours = solve_spd(&a, &rhs).unwrap().solution;
        let na = DMatrix::from_row_slice(4, 4, a.as_slice());
        let theirs = na.cholesky().unwrap().solve(&DVector::from_vec(rhs));
        for (x, y) in ours.iter().zip(theirs.iter()) {
            prop_assert!((x - y).abs() < 1e-9 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn kron_mixed_product(a in prop::collection::vec(-2.0f64..2.0, 4), b in prop::collection::vec(-2.0f64..2.0, 9),
                          c in prop::collection::vec(-2.0f64..2.0, 4), d in prop::collection::vec(-2.0f64..2.0, 9)) {
        let (a, c) = (Matrix::from_vec(2, 2, a).unwrap(), Matrix::from_vec(2, 2, c).unwrap());
        let (b, d) = (Matrix::from_vec(3, 3, b).unwrap(), Matrix::from_vec(3, 3, d).unwrap());
        let lhs = a.kron(&b).matmul(&c.kron(&d));
        let rhs = a.matmul(&c).kron(&b.matmul(&d));
        prop_assert!(lhs.sub(&rhs).max_abs() < 1e-12);
    }
}
