use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AppError {
    #[error(transparent)]
    Core(#[from] asal_core::Error),

    /// Invalid configuration; `path` is the dotted field path.
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error("sidecar: {0}")]
    Sidecar(String),
}

impl AppError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        AppError::Config { path: path.into(), message: message.into() }
    }

    pub fn io(path: &Path, source: io::Error) -> Self {
        AppError::Io { path: path.to_path_buf(), source }
    }

    pub fn format(path: &Path, message: impl ToString) -> Self {
        AppError::Format { path: path.to_path_buf(), message: message.to_string() }
    }
}

pub type Result<T, E = AppError> = std::result::Result<T, E>;
