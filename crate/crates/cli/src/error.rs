use std::path::PathBuf;

use thiserror::Error;

/// Failures surfaced by the command-line layer.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in `{path}` at row {row}, column `{column}`: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: String,
        message: String,
    },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{context}: {source}")]
    Data {
        context: String,
        #[source]
        source: postmon_core::Error,
    },
}

impl CliError {
    pub fn data(context: impl Into<String>, source: postmon_core::Error) -> Self {
        CliError::Data {
            context: context.into(),
            source,
        }
    }

    /// Process exit code: 1 for usage and config problems, 2 for data.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Io { .. } | CliError::Parse { .. } | CliError::Data { .. } => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
