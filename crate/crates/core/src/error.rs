//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    /// Numeric optimization hit a non-finite value. Carries the last
    /// feasible point seen so callers can inspect or restart, and — when the
    /// failure aborts a fit — the bound trace up to the failure.
    #[error("numerical failure: {message}")]
    NumericalFailure {
        message: String,
        last_feasible: Vec<f64>,
        trace_so_far: Vec<f64>,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A simulated node touched state outside its declared scope. This is a
    /// harness assertion, not a recoverable runtime condition.
    #[error("simulation integrity violation: {0}")]
    SimulationIntegrity(String),

    #[error("plan rejected: {0}")]
    PlanRejected(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid_argument(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn invalid_state(msg: impl Into<String>) -> Self {
        Error::InvalidState(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
