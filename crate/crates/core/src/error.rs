use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed NIfTI image: {0}")]
    Nifti(String),
    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("missing channel `{0}`")]
    MissingChannel(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(what: &'static str, detail: impl std::fmt::Display) -> Self {
        Error::Format {
            what,
            detail: detail.to_string(),
        }
    }

    /// Short, stable category name for machine consumption.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Nifti(_) | Error::Format { .. } => "format",
            Error::Invalid(_) => "invalid-input",
            Error::GridMismatch(_) => "data-mismatch",
            Error::MissingChannel(_) => "missing-channel",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
