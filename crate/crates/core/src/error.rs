use std::path::PathBuf;

use crate::eval::LogisticParams;

/// Errors produced anywhere in the crack detection and evaluation pipeline.
#[derive(Debug, thiserror::Error)]
pub enum PcdError {
    /// Two inputs that must share a shape do not.
    #[error("dimension mismatch: {left_w}x{left_h} vs {right_w}x{right_h}")]
    Dimension {
        left_w: usize,
        left_h: usize,
        right_w: usize,
        right_h: usize,
    },

    /// A parameter or input violates its precondition.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// No pixel differs from the background in either frame.
    #[error("no foreground object found (background {bg}, tolerance {tol})")]
    EmptyObject { bg: f64, tol: f64 },

    /// Correlation is undefined, typically because one vector is constant.
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    /// The logistic regression could not be carried out. `fallback` holds the
    /// initialization so callers can still map predictions if they choose to.
    #[error("logistic fit failed: {reason}")]
    Fit {
        reason: String,
        fallback: LogisticParams,
    },

    /// Malformed file contents (manifest, quality map, descriptor).
    #[error("format error in {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl PcdError {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        PcdError::Parameter(msg.into())
    }

    pub(crate) fn dims(a: (usize, usize), b: (usize, usize)) -> Self {
        PcdError::Dimension {
            left_w: a.0,
            left_h: a.1,
            right_w: b.0,
            right_h: b.1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PcdError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        PcdError::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }
}

pub type Result<T, E = PcdError> = std::result::Result<T, E>;
