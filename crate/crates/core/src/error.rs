use thiserror::Error;

/// Errors raised by the learning, signal and imaging routines.
#[derive(Debug, Error)]
pub enum AolError {
    #[error("row {0} has (numerically) zero norm")]
    ZeroRow(usize),

    #[error("signal generation produced a near-zero vector {attempts} times in a row")]
    DegenerateSignal { attempts: usize },

    #[error("stepsize discriminant {discriminant:e} is negative; inputs are not from a PSD matrix and a unit row")]
    NumericalBranch { discriminant: f64 },

    #[error("the estimation phase of the sequential learner is empty (N = {signals}, eps = {eps})")]
    EmptyPhase { signals: usize, eps: f64 },

    #[error("linear solve failed for row {0}")]
    SolveFailure(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("pixel ({0}, {1}) is not covered by any patch")]
    UncoveredPixel(usize, usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, AolError>;

pub(crate) fn invalid(msg: impl Into<String>) -> AolError {
    AolError::InvalidParameter(msg.into())
}

pub(crate) fn mismatch(expected: impl ToString, found: impl ToString) -> AolError {
    AolError::DimensionMismatch {
        expected: expected.to_string(),
        found: found.to_string(),
    }
}
