use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the extraction, matching and evaluation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported format for {path}: {reason}")]
    UnsupportedFormat { path: PathBuf, reason: String },

    #[error("malformed image {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },

    #[error("empty shape: {0} has no foreground pixels")]
    EmptyShape(String),

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("no shapes found under {0}")]
    NoShapesFound(PathBuf),

    #[error("dataset layout error under {path}: {reason}")]
    Layout { path: PathBuf, reason: String },

    #[error("duplicate shape_id {0:?}")]
    DuplicateShapeId(String),

    #[error("empty spectrum source")]
    EmptySpectrumSource,

    #[error("invalid radius {0}: radii must be finite and positive")]
    InvalidRadius(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("histogram kind mismatch: {0:?} vs {1:?}")]
    KindMismatch(crate::descriptors::HistogramKind, crate::descriptors::HistogramKind),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("descriptor extraction failed for {shape_id}: {source}")]
    Extraction {
        shape_id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("knowledge base format error: {0}")]
    KbFormat(String),

    #[error("knowledge base version mismatch: expected {expected}, found {found}")]
    KbVersion { expected: u32, found: String },

    #[error("bin_config violation: {0}")]
    BinConfig(String),

    #[error("non-uniform class sizes: {0}")]
    NonUniformClasses(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
