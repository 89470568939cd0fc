use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {message}", path.display())]
    Malformed { path: PathBuf, line: u64, message: String },

    #[error("unknown material `{0}`")]
    UnknownMaterial(String),

    #[error("unknown sensor `{0}`")]
    UnknownSensor(String),

    #[error("duplicate sample ({object_id}, {sensor}, {sample_index})")]
    DuplicateSample {
        object_id: String,
        sensor: String,
        sample_index: u32,
    },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("unknown object `{0}`")]
    UnknownObject(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the environment (missing files, permissions)
    /// rather than of the data or parameters.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
