use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: file contains no records")]
    EmptyFile { path: PathBuf },

    #[error("{path}, row {row}: {message}")]
    Record {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("unknown label {label:?} at row {row}")]
    UnknownLabel { row: usize, label: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("length mismatch: {left} references vs {right} predictions")]
    LengthMismatch { left: usize, right: usize },

    #[error("unknown backend {0:?}")]
    UnknownBackend(String),

    #[error("token {token} at position {position} of sequence {sequence} has zero probability")]
    ZeroProbability {
        sequence: usize,
        position: usize,
        token: u32,
    },

    #[error("pool {pool:?} has {available} items, need at least {required}")]
    PoolTooSmall {
        pool: &'static str,
        available: usize,
        required: usize,
    },

    #[error("vote error: {0}")]
    Votes(String),

    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
