use std::path::PathBuf;

use thiserror::Error;

use crate::formats::FormatError;

/// Failures of a CLI command, split into input errors (exit 2) and internal
/// invariant violations (exit 3).
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{}: {source}", path.display())]
    Format { path: PathBuf, source: FormatError },

    #[error(transparent)]
    Core(#[from] structent::Error),

    #[error("{0}")]
    Usage(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Internal(_) => 3,
            _ => 2,
        }
    }
}
