use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("degenerate R6D input: {0}")]
    DegenerateR6d(&'static str),

    #[error("invalid rotation matrix: {0}")]
    InvalidRotation(String),

    #[error("skeleton parse error: {0}")]
    SkeletonParse(String),

    #[error("skeleton tree structure error: {0}")]
    TreeStructure(String),

    #[error("skeleton chain coverage error: {0}")]
    ChainCoverage(String),

    #[error("unknown joint chain `{0}`")]
    UnknownChain(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("signal too short: need at least {needed} frames, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("undefined ratio: total spectral power is zero")]
    UndefinedRatio,

    #[error("insufficient frequency bins: need {needed}, got {got}")]
    InsufficientBins { needed: usize, got: usize },

    #[error("{0}")]
    Format(String),

    #[error("unsupported file version {0}")]
    Version(u32),

    #[error("truncated payload: expected {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },

    #[error("header/payload inconsistency: {0}")]
    Inconsistent(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
