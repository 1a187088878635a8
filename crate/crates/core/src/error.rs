use thiserror::Error;

/// Broad category of a failure, used by callers that map errors onto exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Config,
    State,
    Training,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty score vector")]
    EmptyScores,

    #[error("invalid alpha {0}: must lie strictly between 0 and 1")]
    InvalidAlpha(f64),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("predictor has not been calibrated")]
    NotCalibrated,

    #[error("training diverged at epoch {epoch}: {reason}")]
    Diverged { epoch: usize, reason: String },
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::EmptyScores | Error::InvalidAlpha(_) | Error::InvalidInput(_) => {
                ErrorKind::Input
            }
            Error::Config(_) => ErrorKind::Config,
            Error::NotCalibrated => ErrorKind::State,
            Error::Diverged { .. } => ErrorKind::Training,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
