use thiserror::Error;

/// Errors surfaced by network construction, execution, tracing and simulation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network config: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid cache config: {0}")]
    InvalidCache(String),

    #[error("access out of bounds: tensor {tensor} offset {offset} len {len} exceeds {byte_len} bytes")]
    OutOfBounds { tensor: usize, offset: u64, len: u64, byte_len: u64 },

    #[error("unknown tensor id {0}")]
    UnknownTensor(usize),

    #[error("working set must be positive")]
    ZeroWorkingSet,

    #[error("unknown benchmark: {0}")]
    UnknownBenchmark(String),

    #[error("bad filter expression: {0}")]
    BadFilter(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
