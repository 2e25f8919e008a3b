use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] wmseg_core::Error),
    #[error(transparent)]
    Model(#[from] wmseg_unet::Error),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("data leakage: {0}")]
    Leakage(String),
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn category(&self) -> &'static str {
        match self {
            Error::Core(e) => e.category(),
            Error::Model(e) => e.category(),
            Error::Invalid(_) => "invalid-input",
            Error::Leakage(_) => "leakage",
            Error::Diverged(_) => "training",
            Error::Format { .. } => "format",
            Error::Io { .. } => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
