//! Brute-force reference implementations written straight from the
//! definitions, sharing no code with the library beyond the data types.

#![allow(dead_code, clippy::needless_range_loop)]

use mrt_cee::data::{DecisionRecord, MrtDataset, SubjectTrajectory};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Random panel with subject-varying randomization probabilities, random
/// availability, and one continuous feature `x`.
pub fn random_dataset(seed: u64, n: usize, t_points: usize, k_arms: usize) -> MrtDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let subjects = (0..n)
        .map(|i| SubjectTrajectory {
            subject_id: format!("s{i}"),
            records: (0..t_points)
                .map(|t| {
                    let raw: Vec<f64> = (0..=k_arms).map(|_| 0.2 + rng.random::<f64>()).collect();
                    let total: f64 = raw.iter().sum();
                    let probs: Vec<f64> = raw.iter().map(|v| v / total).collect();
                    let available = rng.random::<f64>() < 0.85;
                    let treatment = if available {
                        let u: f64 = rng.random();
                        let mut acc = 0.0;
                        probs.iter().position(|p| {
                            acc += p;
                            u < acc
                        })
                        .unwrap_or(k_arms)
                    } else {
                        0
                    };
                    DecisionRecord {
                        t,
                        available,
                        treatment,
                        rand_probs: probs,
                        outcome: rng.sample::<f64, _>(StandardNormal) + 0.3 * treatment as f64,
                        features: vec![rng.sample(StandardNormal)],
                    }
                })
                .collect(),
        })
        .collect();
    MrtDataset::new(subjects, k_arms, vec!["x".into()]).unwrap()
}

pub struct OracleFit {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub cov_uncorrected: DMatrix<f64>,
    pub cov_corrected: DMatrix<f64>,
}

/// Per-`t` arm frequencies among available records.
pub fn empirical_numerator(data: &MrtDataset) -> Vec<Vec<f64>> {
    (0..data.t_points())
        .map(|t| {
            let mut counts = vec![0.0; data.k_arms() + 1];
            for s in data.subjects() {
                let r = &s.records[t];
                if r.available {
                    counts[r.treatment] += 1.0;
                }
            }
            let total: f64 = counts.iter().sum();
            counts.iter().map(|c| c / total).collect()
        })
        .collect()
}

/// WCLS fit plus uncorrected and leverage-corrected sandwich covariances,
/// with `g = (1, x)` when `g_x` and `f = (1, x)` when `f_x`.
pub fn oracle_fit(data: &MrtDataset, delta: usize, g_x: bool, f_x: bool, numerator: &[Vec<f64>]) -> OracleFit {
    let k = data.k_arms();
    let n = data.n();
    let rows_per = data.t_points() - delta + 1;
    let q = 1 + usize::from(g_x);
    let p = 1 + usize::from(f_x);
    let dim = q + k * p;

    // (d, w, y) per subject, per t
    let mut subj: Vec<Vec<(DVector<f64>, f64, f64)>> = Vec::with_capacity(n);
    for s in data.subjects() {
        let mut rows = Vec::new();
        for t in 0..rows_per {
            let r = &s.records[t];
            let x = r.features[0];
            let g: Vec<f64> = if g_x { vec![1.0, x] } else { vec![1.0] };
            let f: Vec<f64> = if f_x { vec![1.0, x] } else { vec![1.0] };
            let mut d = g.clone();
            for arm in 1..=k {
                let c = if r.treatment == arm { 1.0 } else { 0.0 } - numerator[t][arm];
                d.extend(f.iter().map(|v| c * v));
            }
            let mut w = 0.0;
            if r.available {
                w = numerator[t][r.treatment] / r.rand_probs[r.treatment];
                for j in t + 1..t + delta {
                    let rj = &s.records[j];
                    let indicator = if rj.treatment == 0 { 1.0 } else { 0.0 };
                    let p0 = if rj.available { rj.rand_probs[0] } else { 1.0 };
                    w *= indicator / p0;
                }
            }
            rows.push((DVector::from_vec(d), w, r.outcome));
        }
        subj.push(rows);
    }

    let mut b = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = DVector::<f64>::zeros(dim);
    for rows in &subj {
        for (d, w, y) in rows {
            b += d * d.transpose() * *w;
            rhs += d * (*w * *y);
        }
    }
    let theta = b.clone().lu().solve(&rhs).expect("oracle normal matrix singular");

    let kp = k * p;
    let mut m = DMatrix::<f64>::zeros(kp, kp);
    for rows in &subj {
        for (d, w, _) in rows {
            let db = d.rows(q, kp);
            m += db * db.transpose() * *w;
        }
    }
    m /= n as f64;
    let m_inv = m.clone().try_inverse().expect("oracle bread singular");
    let b_inv = b.clone().try_inverse().expect("oracle normal matrix singular");

    let meat = |corrected: bool| -> DMatrix<f64> {
        let mut sigma = DMatrix::<f64>::zeros(kp, kp);
        for rows in &subj {
            let tn = rows.len();
            let e = DVector::from_iterator(tn, rows.iter().map(|(d, _, y)| y - d.dot(&theta)));
            let e = if corrected {
                let x = DMatrix::from_fn(tn, dim, |i, j| rows[i].0[j]);
                let wm = DMatrix::from_diagonal(&DVector::from_iterator(tn, rows.iter().map(|r| r.1)));
                let h = &x * &b_inv * x.transpose() * &wm;
                let i_minus_h = DMatrix::<f64>::identity(tn, tn) - h;
                i_minus_h.try_inverse().expect("I - H singular") * e
            } else {
                e
            };
            // Double sum over (t, s) pairs.
            for (ti, (dt, wt, _)) in rows.iter().enumerate() {
                for (si, (ds, ws, _)) in rows.iter().enumerate() {
                    let dbt = dt.rows(q, kp);
                    let dbs = ds.rows(q, kp);
                    sigma += dbt * dbs.transpose() * (wt * ws * e[ti] * e[si]);
                }
            }
        }
        sigma / n as f64
    };
    let cov = |sigma: DMatrix<f64>| &m_inv * sigma * &m_inv / n as f64;

    OracleFit {
        alpha: theta.rows(0, q).iter().copied().collect(),
        beta: theta.rows(q, kp).iter().copied().collect(),
        cov_uncorrected: cov(meat(false)),
        cov_corrected: cov(meat(true)),
    }
}

/// Largest relative discrepancy, with values below 1 compared absolutely.
pub fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1.0))
        .fold(0.0, f64::max)
}
