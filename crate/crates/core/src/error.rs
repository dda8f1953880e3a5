use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("non-numeric cell in column `{column}` at data row {row}: `{value}`")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("missing value in column `{column}` at data row {row}")]
    MissingValue { row: usize, column: String },

    #[error("ragged panel: subject `{subject}` has {found} decision points, expected {expected}")]
    RaggedPanel {
        subject: String,
        found: usize,
        expected: usize,
    },

    #[error("duplicate record for subject `{subject}` at t = {t}")]
    DuplicateRecord { subject: String, t: i64 },

    /// Dataset or input violates a documented invariant.
    #[error("{0}")]
    Invalid(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate arm: arm {arm} has zero count among available records at t = {t}")]
    DegenerateArm { t: usize, arm: usize },

    #[error("randomization probabilities are not constant across subjects at t = {t}")]
    NonConstantRandomization { t: usize },

    #[error("positivity violated: {0}")]
    Positivity(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("no convergence: {0}")]
    NonConvergence(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("insufficient sample size: n = {n}, need n > {required}")]
    InsufficientSample { n: usize, required: usize },

    #[error("contrast of target alternative is null")]
    NullContrast,

    #[error("zero contrast")]
    ZeroContrast,

    #[error("effect too small: required sample size exceeds cap {cap}")]
    EffectTooSmall { cap: usize },

    #[error("{failed} of {replicates} replicates failed, exceeding the 1% failure budget (first failure: {first_error})")]
    FailureBudget {
        failed: usize,
        replicates: usize,
        first_error: String,
    },
}

impl Error {
    /// True for failures of the numerical machinery (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular(_)
                | Error::NonConvergence(_)
                | Error::FailureBudget { .. }
                | Error::EffectTooSmall { .. }
        )
    }
}
