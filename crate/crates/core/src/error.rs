use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("kernel size {kernel} exceeds input {height}x{width}")]
    KernelTooLarge {
        kernel: usize,
        height: usize,
        width: usize,
    },

    #[error("pad size {pad} must be smaller than input {height}x{width}")]
    PadTooLarge {
        pad: usize,
        height: usize,
        width: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid bounds: lo = {lo}, hi = {hi}")]
    InvalidBounds { lo: f64, hi: f64 },

    #[error("invalid chromosome: {}", .0.join("; "))]
    InvalidChromosome(Vec<String>),

    #[error("selection error: {0}")]
    Selection(String),

    #[error("format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },

    #[error("degenerate bands with zero mean: {0:?}")]
    DegenerateBands(Vec<usize>),

    #[error("training diverged: {0}")]
    NonFiniteLoss(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(offset: usize, message: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: message.into(),
        }
    }
}
