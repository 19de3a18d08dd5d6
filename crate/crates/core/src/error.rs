use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("numeric error in layer `{layer}`: {message}")]
    Numeric { layer: String, message: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate MP bulk: only {retained} eigenvalues retained (need {required})")]
    DegenerateBulk { retained: usize, required: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("layer is unclassifiable: neither an MP fit nor a power-law fit is available")]
    Unclassifiable,

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
