//! Crate-wide error type.

use std::path::PathBuf;

/// Errors produced by the crossband toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An image file could not be decoded.
    #[error("failed to decode image {path}: {source}")]
    Decode {
        path: PathBuf,
        source: image::ImageError,
    },

    /// The input has an unsupported pixel format (wrong band count or depth).
    #[error("unsupported image format: {0}")]
    Format(String),

    /// Invalid configuration (ratios, empty classes, missing inputs, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// An operation was asked to act outside its domain (degenerate offsets,
    /// mismatched dimensions, oversized crops, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Array shapes do not line up (channel counts, checkpoint/config mismatch).
    #[error("shape error: {0}")]
    Shape(String),

    /// A non-finite value appeared during network evaluation.
    #[error("numerical error in {layer}: non-finite value")]
    Numerical { layer: String },

    /// Training diverged or otherwise failed.
    #[error("training error at epoch {epoch}, batch {batch}: {message}")]
    Training {
        epoch: usize,
        batch: usize,
        message: String,
    },

    /// A checkpoint or cache file is malformed or incompatible.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// Malformed manifest, table, or run-configuration text.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl Error {
    /// Attach a path to a raw i/o error.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
