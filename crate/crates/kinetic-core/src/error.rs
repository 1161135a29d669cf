use thiserror::Error;

/// Unified error type for every module in the crate.
#[derive(Debug, Error)]
pub enum KineticError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("connection impossible: t0 = t1")]
    ConnectionImpossible,

    #[error("no trajectory family: {0}")]
    NoTrajectoryFamily(String),

    #[error("coordinate normalization impossible: {0}")]
    NormalizationImpossible(String),

    #[error("power expansion required: {0}")]
    PowerExpansionRequired(String),

    #[error("reachable set exits the field support: {0}")]
    OutOfSupport(String),

    #[error("exponent relations violated: {0}")]
    InvalidExponents(String),

    #[error("CFL violation: {0}")]
    CflViolation(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("empty intersection: {0}")]
    EmptyIntersection(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}
