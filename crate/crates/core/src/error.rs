use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: `{field}` {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("link distance is zero (path-loss model is singular at d = 0)")]
    ZeroDistance,

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("action index {index} out of range (action space has {count} actions)")]
    ActionOutOfRange { index: usize, count: usize },

    #[error("episode already finished after {slots} slots; call reset")]
    EpisodeFinished { slots: usize },

    #[error("relay grid contains no admissible points")]
    EmptyGrid,

    #[error("empty batch")]
    EmptyBatch,

    #[error("training diverged: non-finite loss at iteration {iteration}")]
    Diverged { iteration: u64 },

    #[error("unknown scheme `{0}` (valid: direct, sat-only, fixed-ground, fixed-hap, all)")]
    UnknownScheme(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
