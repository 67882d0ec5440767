use std::path::PathBuf;
use thiserror::Error;

/// Errors produced by the mpgk library.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A configuration is internally inconsistent or incompatible with the data.
    #[error("configuration error: {0}")]
    Config(String),

    /// An internal contract between modules was violated.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A mandatory input file does not exist.
    #[error("missing {0}")]
    MissingFile(PathBuf),

    /// An input file exists but its contents do not match the expected format.
    #[error("format error in {file}: {message}")]
    Format { file: PathBuf, message: String },

    /// Numerically degenerate input (e.g. a kernel block with no positive spectrum).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
