use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config parse error: {0}")]
    Parse(String),

    #[error("invalid config:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),

    #[error(transparent)]
    Core(#[from] hilbert_rwm_core::CoreError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, CliError>;
