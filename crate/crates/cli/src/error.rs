use std::path::{Path, PathBuf};

use conformal_core::ErrorKind;
use thiserror::Error;

/// Process exit codes. Usage errors are reported by clap with code 2.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const PARSE: i32 = 3;
    pub const INPUT: i32 = 4;
    pub const STATE: i32 = 5;
    pub const TRAINING: i32 = 6;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{0}")]
    Input(String),

    #[error("{0}")]
    Core(#[from] conformal_core::Error),
}

impl CliError {
    pub fn parse(path: &Path, line: usize, message: impl Into<String>) -> Self {
        CliError::Parse {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn input(message: impl Into<String>) -> Self {
        CliError::Input(message.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } => exit::PARSE,
            CliError::Io { .. } | CliError::Input(_) => exit::INPUT,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Input | ErrorKind::Config => exit::INPUT,
                ErrorKind::State => exit::STATE,
                ErrorKind::Training => exit::TRAINING,
            },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
