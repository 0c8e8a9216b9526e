use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite numeric input: {0}")]
    NonFinite(String),

    #[error("estimator diverged at iteration {iteration} (last residual {last_residual:e})")]
    Diverged {
        iteration: usize,
        last_residual: f64,
        trace: Vec<f64>,
    },

    #[error("degenerate anchor: column {column} of the estimated anchored block has zero norm")]
    DegenerateAnchor { column: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("SVD failed: {0}")]
    Svd(String),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error at {path}: {message}")]
    Serialization { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::InvalidDimension(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
