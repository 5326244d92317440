use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] gwl_core::Error),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError::Usage(message.into())
    }

    /// 0 success, 2 usage, 3 data or parse, 4 numeric failure, 5 I/O.
    pub fn exit_code(&self) -> i32 {
        use gwl_core::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(E::Parse { .. } | E::Shape(_) | E::Invalid(_) | E::Checkpoint(_)) => 3,
            CliError::Core(E::NonFinite(_) | E::Numeric(_)) => 4,
            CliError::Core(E::Io(_)) | CliError::Io { .. } => 5,
        }
    }
}

/// Treat a core validation failure as a usage error.
pub fn as_usage<T>(r: gwl_core::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Usage(e.to_string()))
}

pub type CliResult<T> = Result<T, CliError>;
