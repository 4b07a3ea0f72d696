use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid configuration, flags or input files; exit code 2.
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] edpmoe::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Model(edpmoe::Error::Config(_) | edpmoe::Error::Data(_) | edpmoe::Error::SizeMismatch(..)) => 2,
            _ => 1,
        }
    }
}
