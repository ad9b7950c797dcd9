use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An input value lies outside the domain of a mapping.
    #[error("domain error: {0}")]
    Domain(String),

    /// Raster dimensions or indices are inconsistent.
    #[error("structural error: {0}")]
    Structural(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("format error in {path}: {message} (at byte {offset})")]
    Format {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    /// Not enough well-separated colors for the requested instance count.
    #[error("capacity error: {0}")]
    Capacity(String),

    #[error("empty evaluation: {0}")]
    EmptyEvaluation(String),

    #[error("run error: {0}")]
    Run(String),

    #[error("i/o error on {path}: {source}")]
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

    pub(crate) fn format(path: impl Into<PathBuf>, offset: u64, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            offset,
            message: message.into(),
        }
    }

    /// Process exit code for the CLI: 2 for configuration/format problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Format { .. } | Error::Domain(_) | Error::Structural(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
