use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: expected {expected} image, got {actual}")]
    Domain {
        expected: &'static str,
        actual: &'static str,
    },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("insufficient frames: need at least {needed}, got {got}")]
    InsufficientFrames { needed: usize, got: usize },

    #[error("target mean luminance {target:.4} is unreachable; achievable minimum is {minimum:.4}")]
    UnreachableExposure { target: f64, minimum: f64 },

    #[error("training diverged at step {step}: non-finite gradient in {op}")]
    Diverged { step: u64, op: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("tensor file {path}: {reason}")]
    TensorFile { path: PathBuf, reason: String },

    #[error("image {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
