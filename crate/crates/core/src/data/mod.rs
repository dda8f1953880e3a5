//! In-memory MRT panel data.
//!
//! Decision points are 0-based internally; files use 1-based `t`.

mod csv_io;
mod numerator;

pub use csv_io::{load_csv, read_csv, write_csv, CsvSchema, ProbabilitySource};
pub use numerator::{fit_numerator_probs, NumeratorPolicy, NumeratorTable, NUMERATOR_CLIP};

use std::fmt;

use crate::error::{Error, Result};

/// Tolerance on `Σ_k p_t(k) = 1`.
pub const PROB_SUM_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRecord {
    /// 0-based decision point.
    pub t: usize,
    pub available: bool,
    pub treatment: usize,
    /// `p_t(k | H_t)` for `k = 0..=K`.
    pub rand_probs: Vec<f64>,
    pub outcome: f64,
    /// Feature values, aligned with [`MrtDataset::feature_names`].
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectTrajectory {
    pub subject_id: String,
    pub records: Vec<DecisionRecord>,
}

/// A balanced panel: every subject has the same `T` records and the same
/// feature columns. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct MrtDataset {
    subjects: Vec<SubjectTrajectory>,
    t_points: usize,
    k_arms: usize,
    feature_names: Vec<String>,
}

impl MrtDataset {
    /// Checks panel shape (subject count, balanced `t = 0..T`, vector
    /// lengths). Probability and treatment invariants are left to
    /// [`validate`].
    pub fn new(
        subjects: Vec<SubjectTrajectory>,
        k_arms: usize,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let first = subjects
            .first()
            .ok_or_else(|| Error::Invalid("dataset has no subjects".into()))?;
        let t_points = first.records.len();
        if t_points == 0 {
            return Err(Error::Invalid("subjects have no decision points".into()));
        }
        if k_arms == 0 {
            return Err(Error::Invalid("need at least one active treatment level".into()));
        }
        for s in &subjects {
            if s.records.len() != t_points {
                return Err(Error::RaggedPanel {
                    subject: s.subject_id.clone(),
                    found: s.records.len(),
                    expected: t_points,
                });
            }
            for (t, r) in s.records.iter().enumerate() {
                if r.t != t {
                    return Err(Error::Invalid(format!(
                        "subject `{}`: decision points must run 1..={} in order",
                        s.subject_id, t_points
                    )));
                }
                if r.rand_probs.len() != k_arms + 1 {
                    return Err(Error::Invalid(format!(
                        "subject `{}`, t = {}: expected {} randomization probabilities, got {}",
                        s.subject_id,
                        t + 1,
                        k_arms + 1,
                        r.rand_probs.len()
                    )));
                }
                if r.features.len() != feature_names.len() {
                    return Err(Error::Invalid(format!(
                        "subject `{}`, t = {}: feature count mismatch",
                        s.subject_id,
                        t + 1
                    )));
                }
            }
        }
        Ok(Self {
            subjects,
            t_points,
            k_arms,
            feature_names,
        })
    }

    pub fn subjects(&self) -> &[SubjectTrajectory] {
        &self.subjects
    }

    pub fn n(&self) -> usize {
        self.subjects.len()
    }

    pub fn t_points(&self) -> usize {
        self.t_points
    }

    pub fn k_arms(&self) -> usize {
        self.k_arms
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|f| f == name)
    }

    /// Returns a copy with every outcome mapped through `f`.
    pub fn map_outcomes(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut out = self.clone();
        for s in &mut out.subjects {
            for r in &mut s.records {
                r.outcome = f(r.outcome);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    ProbabilityRange { subject: String, t: usize },
    ProbabilitySum { subject: String, t: usize, sum: f64 },
    UnavailableTreated { subject: String, t: usize },
    Positivity { subject: String, t: usize, arm: usize },
    TreatmentExceedsK { subject: String, t: usize, treatment: usize, k_arms: usize },
    NonFinite { subject: String, t: usize, what: &'static str },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // t is reported 1-based, as in files.
        match self {
            Violation::ProbabilityRange { subject, t } => {
                write!(f, "subject `{subject}`, t = {}: probability outside [0, 1]", t + 1)
            }
            Violation::ProbabilitySum { subject, t, sum } => write!(
                f,
                "subject `{subject}`, t = {}: probabilities do not sum to 1 (sum = {sum})",
                t + 1
            ),
            Violation::UnavailableTreated { subject, t } => write!(
                f,
                "subject `{subject}`, t = {}: unavailable point carries active treatment",
                t + 1
            ),
            Violation::Positivity { subject, t, arm } => write!(
                f,
                "subject `{subject}`, t = {}: positivity violation, realized arm {arm} has probability 0",
                t + 1
            ),
            Violation::TreatmentExceedsK { subject, t, treatment, k_arms } => write!(
                f,
                "subject `{subject}`, t = {}: dimension violation, treatment {treatment} exceeds K = {k_arms}",
                t + 1
            ),
            Violation::NonFinite { subject, t, what } => {
                write!(f, "subject `{subject}`, t = {}: non-finite {what}", t + 1)
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    /// Converts a non-empty report into an error naming the first few violations.
    pub fn into_result(self) -> Result<()> {
        if self.is_clean() {
            return Ok(());
        }
        let shown: Vec<String> = self.violations.iter().take(5).map(|v| v.to_string()).collect();
        let more = self.violations.len().saturating_sub(5);
        let mut msg = shown.join("; ");
        if more > 0 {
            msg.push_str(&format!("; and {more} more"));
        }
        Err(Error::Invalid(msg))
    }
}

/// Checks every record-level invariant plus positivity on realized arms.
pub fn validate(data: &MrtDataset) -> ValidationReport {
    let mut violations = Vec::new();
    for s in data.subjects() {
        let subject = || s.subject_id.clone();
        for r in &s.records {
            let t = r.t;
            if r.rand_probs.iter().any(|p| !p.is_finite()) {
                violations.push(Violation::NonFinite { subject: subject(), t, what: "probability" });
                continue;
            }
            if !r.outcome.is_finite() {
                violations.push(Violation::NonFinite { subject: subject(), t, what: "outcome" });
            }
            if r.features.iter().any(|v| !v.is_finite()) {
                violations.push(Violation::NonFinite { subject: subject(), t, what: "feature" });
            }
            if r.rand_probs.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                violations.push(Violation::ProbabilityRange { subject: subject(), t });
            }
            let sum: f64 = r.rand_probs.iter().sum();
            if (sum - 1.0).abs() > PROB_SUM_TOL {
                violations.push(Violation::ProbabilitySum { subject: subject(), t, sum });
            }
            if r.treatment > data.k_arms() {
                violations.push(Violation::TreatmentExceedsK {
                    subject: subject(),
                    t,
                    treatment: r.treatment,
                    k_arms: data.k_arms(),
                });
                continue;
            }
            if !r.available && r.treatment != 0 {
                violations.push(Violation::UnavailableTreated { subject: subject(), t });
            }
            if r.available && r.rand_probs[r.treatment] <= 0.0 {
                violations.push(Violation::Positivity { subject: subject(), t, arm: r.treatment });
            }
        }
    }
    ValidationReport { violations }
}
