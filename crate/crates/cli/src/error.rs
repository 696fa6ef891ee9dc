use std::path::PathBuf;
use thiserror::Error;

/// Process exit codes: 0 completed, 2 all sessions aborted, 3 configuration
/// error, 4 I/O error.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("configuration errors:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] bqml_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Validation(_) => 3,
            CliError::Io { .. } => 4,
            CliError::Core(bqml_core::Error::Config(_)) => 3,
            CliError::Core(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
