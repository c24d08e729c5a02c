use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0} is not valid UTF-8")]
    NotUtf8(PathBuf),

    #[error("corpus {0} is empty")]
    EmptyCorpus(PathBuf),

    #[error("corpus must contain at least 2 characters to split, got {0}")]
    CorpusTooShort(usize),

    #[error("validation fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),

    #[error("histogram has no complete windows")]
    EmptyHistogram,

    #[error("window size must be at least 1")]
    ZeroWindow,

    #[error("prefix chain is broken: {0:?} is not a strict prefix of {1:?}")]
    BrokenPrefixChain(String, String),

    #[error("series {name:?} needs at least {needed} defined points, got {got}")]
    TooFewPoints {
        name: String,
        needed: usize,
        got: usize,
    },

    #[error("series {0:?} is constant; there is no transition to fit")]
    NoTransition(String),

    #[error("checkpoints of series {0:?} are not strictly increasing")]
    UnorderedSeries(String),

    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
