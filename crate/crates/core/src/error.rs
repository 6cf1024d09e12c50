use thiserror::Error;

/// Errors raised by measure construction, composition and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("marginal mismatch: max marginal defect {max_defect:.3e} exceeds tolerance {tolerance:.1e}")]
    MarginalMismatch { max_defect: f64, tolerance: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("set [{lo}, {hi}] lies outside the support [{support_lo}, {support_hi}]")]
    OutOfSupport {
        lo: f64,
        hi: f64,
        support_lo: f64,
        support_hi: f64,
    },

    #[error("empty ratio set: base measure of [{lo}, {hi}) is zero")]
    EmptyRatioSet { lo: f64, hi: f64 },

    #[error("root finding failed: {0}")]
    RootFinding(String),

    #[error("level-set partition needs {count} thresholds (limit {limit})")]
    TooManyLevels { count: f64, limit: usize },

    #[error("epsilon schedule is empty")]
    EmptySchedule,

    #[error("no convergence after {levels} levels (last difference {achieved:.3e}, tolerance {tolerance:.1e})")]
    NonConvergence {
        levels: usize,
        achieved: f64,
        tolerance: f64,
    },

    #[error("upper bracket is unbounded on every level of the refinement chain")]
    UnboundedBracket,

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unbound variable `{name}` at line {line}, column {column}")]
    UnboundVariable {
        name: String,
        line: usize,
        column: usize,
    },

    #[error("variance must be positive at line {line}, column {column}")]
    NonPositiveVariance { line: usize, column: usize },

    #[error("observation has measure {denominator:.3e}; conditioning on it requires disintegration")]
    ZeroMeasureObservation { denominator: f64 },

    #[error("no samples satisfied the observation")]
    ZeroAccepted,

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
