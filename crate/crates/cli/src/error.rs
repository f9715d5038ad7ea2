use std::path::PathBuf;

use thiserror::Error;

/// Failures of a subcommand. Each kind maps to its own exit status; clap's
/// own usage errors exit with 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: file not found")]
    NotFound { path: PathBuf },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{0}")]
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 3,
            CliError::NotFound { .. } => 4,
            CliError::Io { .. } => 5,
            CliError::Format { .. } => 6,
            CliError::Run(_) => 7,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> CliError {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            CliError::NotFound { path }
        } else {
            CliError::Io { path, source }
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl ToString) -> CliError {
        CliError::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }
}
