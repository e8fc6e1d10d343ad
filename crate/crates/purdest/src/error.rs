use thiserror::Error;

/// Errors produced by the estimation pipeline and its supporting modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("enumeration over {dim} coordinates exceeds the cap of {cap}")]
    EnumerationCapExceeded { dim: usize, cap: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("insufficient samples: need {required}, have {actual}")]
    InsufficientSamples { required: usize, actual: usize },

    #[error("derived parameter overflow: {0}")]
    ParameterOverflow(String),

    #[error("unknown learner {0:?} (expected \"oracle\" or \"clipped-laplace\")")]
    UnknownLearner(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
