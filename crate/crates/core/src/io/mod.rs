//! File formats: PGM frames, CSV tables, SVG quiver plots, JSON-lines run
//! records, the flat TOML run configuration and run-directory manifests.

pub mod config;
pub mod pgm;
pub mod records;
pub mod rundir;
pub mod svg;
pub mod table;

use thiserror::Error;

use crate::error::ModelError;

pub use pgm::PgmError;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Pgm(#[from] PgmError),

    #[error("table line {line}: {message}")]
    Table { line: usize, message: String },

    #[error("record line {line}: {source}")]
    Record { line: usize, source: serde_json::Error },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Model(#[from] ModelError),

    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl IoError {
    pub(crate) fn table(line: usize, message: impl Into<String>) -> Self {
        IoError::Table { line, message: message.into() }
    }
}

/// Read a file, keeping the path in the error.
pub fn read_file(path: &std::path::Path) -> Result<Vec<u8>, IoError> {
    std::fs::read(path).map_err(|source| IoError::File { path: path.display().to_string(), source })
}

/// Write a file, keeping the path in the error.
pub fn write_file(path: &std::path::Path, bytes: &[u8]) -> Result<(), IoError> {
    std::fs::write(path, bytes).map_err(|source| IoError::File { path: path.display().to_string(), source })
}
