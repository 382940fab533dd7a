use alloc::string::String;

/// Errors raised by configuration checks, samplers and forecasting routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("p must be < k (got p = {p}, k = {k})")]
    FactorCount { p: usize, k: usize },
    #[error("index {index} out of range 0..{len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("non-finite state at sweep {sweep}: {component}")]
    NonFinite { sweep: usize, component: String },
    #[error("chain too short: {len} draws, need at least {min}")]
    ChainTooShort { len: usize, min: usize },
    #[error("degenerate chain: {0}")]
    Degenerate(String),
    #[error("infeasible portfolio target: {0}")]
    Infeasible(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
