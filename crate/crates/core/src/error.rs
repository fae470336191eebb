use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("wav format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A requested partial could not be located in the spectrum.
    #[error("missing partial m={m}")]
    MissingPartial { m: usize },

    #[error("estimation failed: {0}")]
    EstimationFailed(String),

    #[error("fit diverged in {stage}: loss {loss:.6e} exceeds 1e3 x initial {initial:.6e}")]
    Divergence {
        stage: String,
        loss: f64,
        initial: f64,
    },

    #[error("model load error in `{field}`: {message}")]
    Load { field: String, message: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
