use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model config: {0}")]
    InvalidModel(String),

    #[error("invalid training config: {0}")]
    InvalidTrain(String),

    #[error("character {0:?} is not in the model vocabulary")]
    UnknownChar(char),

    #[error("{split} split has {got} tokens but a sequence needs {needed}")]
    SplitTooShort {
        split: &'static str,
        got: usize,
        needed: usize,
    },

    #[error("loss became non-finite at update {update}; lower learning_rate (currently {learning_rate}) or tighten grad_clip")]
    NonFiniteLoss { update: u64, learning_rate: f64 },

    #[error("snapshot {path}: {reason}")]
    Snapshot { path: PathBuf, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] lexphase_core::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| Error::Io { path, source }
    }
}
