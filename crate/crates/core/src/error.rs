//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter failed its construction-time constraint.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A point lies outside the declared domain of a kernel or geometry.
    #[error("domain violation: {0}")]
    DomainViolation(String),

    /// A rate schedule failed validation; the message names the condition.
    #[error("schedule rejected: {0}")]
    ScheduleRejected(String),

    /// Incompatible combination of model, kernel, or oracle choices.
    #[error("incompatible configuration: {0}")]
    Incompatible(String),

    /// The closed-form oracle disagreed with its Monte Carlo check.
    #[error("oracle gate failed: {0}")]
    OracleGate(String),

    #[error("config error: {0}")]
    Config(String),

    /// A runtime invariant that validated inputs should make impossible.
    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
