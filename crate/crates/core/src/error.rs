use thiserror::Error;

/// Errors produced by the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GateError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    #[error("unsupported operation: {0}")]
    UnsupportedOperation(String),

    #[error("internal consistency failure: {0}")]
    InternalConsistency(String),

    #[error("fit failed after {iterations} iterations: {reason} (last d = {last_d:e}, residual = {residual:e})")]
    FitFailure {
        reason: String,
        iterations: usize,
        last_d: f64,
        residual: f64,
    },

    #[error("undefined result: {0}")]
    UndefinedResult(String),

    #[error("accuracy failure: {0}")]
    AccuracyFailure(String),
}

pub type Result<T> = std::result::Result<T, GateError>;
