use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index {index} out of range for {len} points")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("predicted simplex count {count} exceeds the cap of {cap}")]
    SimplexCapExceeded { count: usize, cap: usize },

    #[error("{0} is not a prime")]
    NotPrime(u64),

    #[error("infinite bar counts differ in dimension {dim}: {left} vs {right}")]
    InfiniteBarMismatch { dim: usize, left: usize, right: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("input is not torsional: {0}")]
    NotTorsional(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
