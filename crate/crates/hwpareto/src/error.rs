use std::path::{Path, PathBuf};

use hwpareto_core::Error as CoreError;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const DATA: i32 = 3;
    pub const NUMERIC: i32 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Data { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] CoreError),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn data(path: &Path, msg: impl std::fmt::Display) -> Self {
        CliError::Data { path: path.to_path_buf(), message: msg.to_string() }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Data { .. } | CliError::Io { .. } => exit::DATA,
            CliError::Core(e) => match e {
                CoreError::Usage(_) | CoreError::Parameter(_) | CoreError::Recipe(_) => exit::USAGE,
                CoreError::Numeric(_) | CoreError::Evaluation(_) | CoreError::Pretraining(_) | CoreError::Training(_) => {
                    exit::NUMERIC
                }
                _ => exit::DATA,
            },
        }
    }
}
