use std::path::PathBuf;

use crate::scheme::FailureReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("ring mismatch: {left} vs {right}")]
    RingMismatch { left: String, right: String },

    #[error("invalid ring: {0}")]
    InvalidRing(String),

    #[error("unsupported ring: {0}")]
    UnsupportedRing(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("rejected move: {0}")]
    RejectedMove(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("scheme does not verify: {0}")]
    NotVerified(FailureReport),

    #[error("parse error at line {line}, {field}: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },

    #[error("missing seed pool for format {0}")]
    MissingSeed(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Structural(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
