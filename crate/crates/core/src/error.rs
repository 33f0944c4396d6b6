//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors raised by field operations, models, SOM training and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("sigma must be positive, got {0}")]
    NonPositiveSigma(f64),

    #[error("dirac width must be positive, got {0}")]
    NonPositiveEps(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("rectangle ({x},{y},{w},{h}) does not fit in a {width}x{height} domain")]
    RectOutOfBounds {
        x: usize,
        y: usize,
        w: usize,
        h: usize,
        width: usize,
        height: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: String, got: String },

    #[error("region is empty")]
    EmptyRegion,

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("local scale sigma* ({sigma_star}) must be smaller than sigma ({sigma})")]
    ParamOrder { sigma_star: f64, sigma: f64 },

    #[error("image has a single intensity level")]
    ConstantImage,

    #[error("shape {index} does not fit in a {width}x{height} canvas")]
    ShapeOutOfBounds {
        index: usize,
        width: usize,
        height: usize,
    },

    #[error("model `{model}` needs a single-channel image")]
    ScalarOnly { model: &'static str },

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("corrupt header: {0}")]
    CorruptHeader(String),

    #[error("truncated pixel data: expected {expected} bytes, found {found}")]
    TruncatedData { expected: usize, found: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error on {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn dims(expected: impl Into<String>, got: impl Into<String>) -> Self {
        Error::DimMismatch {
            expected: expected.into(),
            got: got.into(),
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by the file system rather than by bad input.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
