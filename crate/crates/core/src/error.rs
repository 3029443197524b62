use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("invalid tensor: {0}")]
    InvalidTensor(String),

    #[error("index {index} out of vocabulary of size {size}")]
    Lookup { index: usize, size: usize },

    #[error("unknown activation `{0}`")]
    UnknownActivation(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("checkpoint configuration mismatch: {0}")]
    ConfigMismatch(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: {detail}")]
    Divergence {
        epoch: usize,
        batch: usize,
        detail: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end.
    ///
    /// `1` usage/config, `2` data, `3` numerical divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::ConfigMismatch(_) | Error::InvalidArgument(_) | Error::UnknownActivation(_) => 1,
            Error::Divergence { .. } | Error::NonFinite(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
