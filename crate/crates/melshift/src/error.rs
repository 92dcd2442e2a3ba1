//! Error type shared across the crate.
//!
//! Every error carries a stable machine-readable kind (emitted as JSON on
//! stderr by the CLI) and maps to one of the documented exit codes:
//! 2 for I/O and malformed files, 3 for invalid configuration or flags,
//! 4 for an empty input set.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed wav file: {0}")]
    Wav(String),

    #[error("bad magic: not a MELF file")]
    BadMagic,

    #[error("unsupported MELF version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("truncated payload: expected {expected} bytes of feature data, got {got}")]
    TruncatedPayload { expected: usize, got: usize },

    #[error("malformed MELF file: {0}")]
    Melf(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("config mismatch: {0}")]
    ConfigMismatch(String),

    #[error("rank-deficient matrix: effective rank {rank}, expected {expected}")]
    RankDeficient { rank: usize, expected: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("empty input set: no usable files in {0}")]
    EmptyInputSet(PathBuf),
}

impl Error {
    /// Stable machine-readable error kind for diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io(_) => "io",
            Error::Wav(_) | Error::BadMagic | Error::UnsupportedVersion { .. } => "format",
            Error::TruncatedPayload { .. } | Error::Melf(_) => "format",
            Error::Config(_) => "config",
            Error::ConfigMismatch(_) => "config-mismatch",
            Error::RankDeficient { .. } => "rank-deficient",
            Error::DimensionMismatch(_) => "dimension-mismatch",
            Error::EmptyInputSet(_) => "empty-input",
        }
    }

    /// Process exit code the CLI uses for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_)
            | Error::Wav(_)
            | Error::BadMagic
            | Error::UnsupportedVersion { .. }
            | Error::TruncatedPayload { .. }
            | Error::Melf(_) => 2,
            Error::Config(_)
            | Error::ConfigMismatch(_)
            | Error::RankDeficient { .. }
            | Error::DimensionMismatch(_) => 3,
            Error::EmptyInputSet(_) => 4,
        }
    }
}
