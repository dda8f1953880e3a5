//! Numerator probabilities `p̃_t(k)` for weight stabilization and centering.

use super::MrtDataset;
use crate::error::{Error, Result};

/// Numerator probabilities are clipped to `[NUMERATOR_CLIP, 1 - NUMERATOR_CLIP]`.
pub const NUMERATOR_CLIP: f64 = 1e-6;

const CONSTANT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum NumeratorPolicy {
    /// Copy `p_t(k)` from the data; requires it to be identical across subjects.
    MatchRandomization,
    /// Arm frequencies among available records, per decision point.
    EmpiricalPerT,
    /// Arm frequencies among available records, pooled over decision points.
    EmpiricalPooled,
    /// Fixed `T x (K + 1)` table.
    UserSupplied(Vec<Vec<f64>>),
}

impl NumeratorPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            NumeratorPolicy::MatchRandomization => "match_randomization",
            NumeratorPolicy::EmpiricalPerT => "empirical_per_t",
            NumeratorPolicy::EmpiricalPooled => "empirical_pooled",
            NumeratorPolicy::UserSupplied(_) => "user_supplied",
        }
    }
}

impl std::str::FromStr for NumeratorPolicy {
    type Err = Error;

    /// Parses the named policies; a user-supplied table must be built directly.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "match_randomization" => Ok(NumeratorPolicy::MatchRandomization),
            "empirical_per_t" => Ok(NumeratorPolicy::EmpiricalPerT),
            "empirical_pooled" => Ok(NumeratorPolicy::EmpiricalPooled),
            other => Err(Error::Config(format!(
                "unknown numerator policy `{other}` (expected match_randomization, \
                 empirical_per_t or empirical_pooled)"
            ))),
        }
    }
}

/// Resolved `T x (K + 1)` numerator table, 0-based in `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct NumeratorTable {
    rows: Vec<Vec<f64>>,
}

impl NumeratorTable {
    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn prob(&self, t: usize, arm: usize) -> f64 {
        self.rows[t][arm]
    }
}

pub fn fit_numerator_probs(data: &MrtDataset, policy: &NumeratorPolicy) -> Result<NumeratorTable> {
    let t_points = data.t_points();
    let arms = data.k_arms() + 1;
    let raw: Vec<Vec<f64>> = match policy {
        NumeratorPolicy::MatchRandomization => (0..t_points)
            .map(|t| constant_randomization(data, t))
            .collect::<Result<_>>()?,
        NumeratorPolicy::EmpiricalPerT => (0..t_points)
            .map(|t| {
                let counts = arm_counts(data, t..t + 1);
                frequencies(&counts, t)
            })
            .collect::<Result<_>>()?,
        NumeratorPolicy::EmpiricalPooled => {
            for t in 0..t_points {
                if arm_counts(data, t..t + 1).iter().sum::<usize>() == 0 {
                    return Err(no_available(t));
                }
            }
            let counts = arm_counts(data, 0..t_points);
            let row = frequencies(&counts, 0).map_err(|e| match e {
                Error::DegenerateArm { arm, .. } => Error::Invalid(format!(
                    "degenerate arm: arm {arm} never observed among available records"
                )),
                other => other,
            })?;
            vec![row; t_points]
        }
        NumeratorPolicy::UserSupplied(table) => {
            if table.len() != t_points || table.iter().any(|r| r.len() != arms) {
                return Err(Error::Invalid(format!(
                    "user-supplied numerator table must be {t_points} x {arms}"
                )));
            }
            for (t, row) in table.iter().enumerate() {
                let sum: f64 = row.iter().sum();
                if row.iter().any(|&p| !(p > 0.0) || !p.is_finite()) || (sum - 1.0).abs() > 1e-8 {
                    return Err(Error::Invalid(format!(
                        "user-supplied numerator row t = {} is not a positive probability vector",
                        t + 1
                    )));
                }
            }
            table.clone()
        }
    };
    Ok(NumeratorTable {
        rows: raw.into_iter().map(clip_and_normalize).collect(),
    })
}

fn constant_randomization(data: &MrtDataset, t: usize) -> Result<Vec<f64>> {
    let mut records = data.subjects().iter().map(|s| &s.records[t]);
    let available: Vec<_> = records.clone().filter(|r| r.available).collect();
    let reference = match available.first() {
        Some(r) => &r.rand_probs,
        None => &records.next().expect("non-empty dataset").rand_probs,
    };
    let pool: Vec<&Vec<f64>> = if available.is_empty() {
        data.subjects().iter().map(|s| &s.records[t].rand_probs).collect()
    } else {
        available.iter().map(|r| &r.rand_probs).collect()
    };
    let constant = pool
        .iter()
        .all(|p| p.iter().zip(reference).all(|(a, b)| (a - b).abs() <= CONSTANT_TOL));
    if !constant {
        return Err(Error::NonConstantRandomization { t: t + 1 });
    }
    Ok(reference.clone())
}

fn arm_counts(data: &MrtDataset, ts: std::ops::Range<usize>) -> Vec<usize> {
    let mut counts = vec![0usize; data.k_arms() + 1];
    for s in data.subjects() {
        for r in &s.records[ts.clone()] {
            if r.available && r.treatment < counts.len() {
                counts[r.treatment] += 1;
            }
        }
    }
    counts
}

fn no_available(t: usize) -> Error {
    Error::Invalid(format!(
        "empirical numerator needs at least one available record at t = {}",
        t + 1
    ))
}

fn frequencies(counts: &[usize], t: usize) -> Result<Vec<f64>> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(no_available(t));
    }
    if let Some(arm) = counts.iter().position(|&c| c == 0) {
        return Err(Error::DegenerateArm { t: t + 1, arm });
    }
    Ok(counts.iter().map(|&c| c as f64 / total as f64).collect())
}

fn clip_and_normalize(row: Vec<f64>) -> Vec<f64> {
    let clipped: Vec<f64> = row
        .into_iter()
        .map(|p| p.clamp(NUMERATOR_CLIP, 1.0 - NUMERATOR_CLIP))
        .collect();
    let sum: f64 = clipped.iter().sum();
    clipped.into_iter().map(|p| p / sum).collect()
}
