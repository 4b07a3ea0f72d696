use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid data: {0}")]
    Data(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("matrix not positive definite after jitter up to {jitter:e}")]
    NotPositiveDefinite { jitter: f64 },
    #[error("partition size mismatch: {0} vs {1}")]
    SizeMismatch(usize, usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
