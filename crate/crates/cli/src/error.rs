use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("config {path}: {reason}")]
    Config { path: PathBuf, reason: String },

    #[error("{path}:{line}: {reason}")]
    BadRecord {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("{0}")]
    Data(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] lexphase_core::Error),

    #[error(transparent)]
    Trainer(#[from] lexphase_trainer::Error),

    #[error("CSV output failed: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON serialization failed: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } => EXIT_USAGE,
            CliError::BadRecord { .. } | CliError::Data(_) | CliError::Io { .. } => EXIT_DATA,
            CliError::Core(e) => core_code(e),
            CliError::Trainer(e) => match e {
                lexphase_trainer::Error::InvalidModel(_)
                | lexphase_trainer::Error::InvalidTrain(_) => EXIT_USAGE,
                lexphase_trainer::Error::Core(e) => core_code(e),
                lexphase_trainer::Error::Json(_) => EXIT_INTERNAL,
                _ => EXIT_DATA,
            },
            CliError::Csv(_) | CliError::Json(_) | CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

fn core_code(e: &lexphase_core::Error) -> i32 {
    use lexphase_core::Error as E;
    match e {
        E::InvalidSpec(_) | E::ZeroWindow | E::BrokenPrefixChain(..) | E::InvalidFraction(_) => {
            EXIT_USAGE
        }
        _ => EXIT_DATA,
    }
}
