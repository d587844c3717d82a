use std::io;

use thiserror::Error;

/// Errors raised by the image pipeline and the scene generator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unexpected pixel format: expected {expected}, got {actual}")]
    Format {
        expected: &'static str,
        actual: &'static str,
    },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    Dimension(u32, u32, u32, u32),
    #[error("degenerate contour: zero area")]
    DegenerateContour,
    #[error("invalid scene: {0}")]
    Scene(String),
    #[error("image codec: {0}")]
    Codec(#[from] image::ImageError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
