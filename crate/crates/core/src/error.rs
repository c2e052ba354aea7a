use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension {0} unsupported (expected 1..=8)")]
    DimensionUnsupported(usize),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("grade {grade} out of range for dimension {dim}")]
    GradeOutOfRange { grade: usize, dim: usize },

    #[error("coefficient array has length {got}, expected {expected}")]
    CoefficientLength { got: usize, expected: usize },

    #[error("matrix is not orthogonal (max |QᵀQ − I| = {0:e})")]
    NotOrthogonal(f64),

    #[error("Clifford group element is not invertible: {0}")]
    NotInvertible(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid graph: {0}")]
    Graph(String),

    #[error("degenerate hull: {0}")]
    DegenerateHull(String),

    #[error("point set is empty")]
    EmptySet,

    #[error("non-finite gradient at parameter index {0}")]
    NonFiniteGradient(usize),

    #[error("non-finite loss at iteration {0}")]
    NonFiniteLoss(u64),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed data: {msg}")]
    Format { path: PathBuf, msg: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
