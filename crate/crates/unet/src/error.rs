use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid value: {0}")]
    Value(String),
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint does not fit this model: {0}")]
    Fingerprint(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short stable label for command-line error reporting.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Config(_) | Error::Value(_) => "invalid-input",
            Error::Shape(_) | Error::Fingerprint(_) => "data-mismatch",
            Error::Checkpoint(_) => "format",
            Error::Io { .. } => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
