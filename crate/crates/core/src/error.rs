use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("not found: {0}")]
    NotFound(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("need at least 2 keyframes, got {0}")]
    TooFewKeyframes(usize),

    #[error("keyframe indices are not strictly increasing: {0:?}")]
    Unsorted(Vec<usize>),

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("malformed flow file {path}: {reason}")]
    FlowFormat { path: PathBuf, reason: String },

    #[error("missing {direction} flow for frame {frame}")]
    MissingFlow { frame: usize, direction: &'static str },

    #[error("homography fit failed: {0}")]
    FitFailed(String),

    #[error("cannot decode label image {path}: {count} pixel(s) with unmapped colors {colors:?}")]
    Decode {
        path: PathBuf,
        count: usize,
        colors: Vec<[u8; 3]>,
    },

    #[error("polygons leave {0} pixel(s) uncovered")]
    IncompleteCoverage(usize),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
