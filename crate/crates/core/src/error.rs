use thiserror::Error;

/// Errors raised by state-space validation, samplers, integrators and generators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    /// The point lies outside the set where the requested map or operator is defined.
    #[error("outside domain: {0}")]
    Domain(String),

    /// The integrator refused to continue (projection moved the state too far).
    #[error("integration aborted: {0}")]
    Diagnostic(String),

    #[error("time-change driver exhausted at {needed} (horizon {horizon})")]
    DriverExhausted { needed: f64, horizon: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn state(msg: impl Into<String>) -> Error {
    Error::InvalidState(msg.into())
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
