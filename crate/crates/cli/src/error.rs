use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{context}: {message}")]
    Data { context: String, message: String },
    #[error("{0} numerical warning(s) escalated by --strict")]
    Strict(usize),
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn data(context: impl Into<String>, err: impl std::fmt::Display) -> Self {
        CliError::Data {
            context: context.into(),
            message: err.to_string(),
        }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data { .. } => 3,
            CliError::Strict(_) => 4,
            CliError::Io { .. } => 1,
        }
    }
}
