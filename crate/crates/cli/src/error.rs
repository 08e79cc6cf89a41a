use std::path::Path;

use thiserror::Error;

/// Failure of a CLI run. The variant decides the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, configuration or input files; exit code 2.
    #[error("{0}")]
    Validation(String),

    #[error(transparent)]
    Core(#[from] jackstraw_core::Error),

    /// Reading or writing a file failed; exit code 1.
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            context: path.display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Core(e) if e.is_validation() => 2,
            CliError::Core(_) | CliError::Io { .. } => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
