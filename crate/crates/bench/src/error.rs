use std::path::PathBuf;

use qubit_readout::{FormatError, ReadoutError};
use thiserror::Error;

pub type Result<T, E = BenchError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Readout(#[from] ReadoutError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        source: FormatError,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("bad data: {0}")]
    Data(String),
}

impl BenchError {
    /// 1 usage, 2 data, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Usage(_) => 1,
            BenchError::Readout(e) if e.is_numeric() => 3,
            BenchError::Readout(ReadoutError::InvalidConfig(_)) => 1,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> BenchError {
        let path = path.into();
        move |source| BenchError::Io { path, source }
    }

    pub(crate) fn file(path: impl Into<PathBuf>) -> impl FnOnce(FormatError) -> BenchError {
        let path = path.into();
        move |source| BenchError::File { path, source }
    }
}

impl From<FormatError> for BenchError {
    fn from(e: FormatError) -> Self {
        BenchError::Readout(ReadoutError::Format(e))
    }
}
