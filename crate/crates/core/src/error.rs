use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("jet order {have} is too low, need at least {need}")]
    InsufficientOrder { have: usize, need: usize },

    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown identifier `{name}` at line {line}, column {column}")]
    UnknownIdentifier {
        name: String,
        line: usize,
        column: usize,
    },

    #[error("{0}")]
    UndefinedOnDomain(String),

    #[error("point {point:?} lies outside the domain {domain}")]
    Domain { point: Vec<f64>, domain: String },

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("matrix is not in GL: {0}")]
    NotInGl(String),

    #[error("rank decision is indeterminate (singular value {value:.3e} within 10x of threshold {threshold:.3e})")]
    IndeterminateRank { value: f64, threshold: f64 },

    #[error("unsupported stratum: {0}")]
    UnsupportedStratum(String),

    #[error("points do not share a fiber: {0}")]
    Fiber(String),

    #[error("invalid distance-squared spec: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn eval(msg: impl Into<String>) -> Self {
        Error::Evaluation(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
