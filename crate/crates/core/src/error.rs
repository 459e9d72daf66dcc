use thiserror::Error;

/// Errors raised by the simulation engines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{element} shifts OAM {oam} outside the truncation window |l| <= {bound}")]
    TruncationOverflow { element: String, oam: i64, bound: u32 },
    #[error("unknown element `{0}`")]
    UnknownElement(String),
    #[error("{element} is not unitary (max deviation {deviation:e})")]
    ConventionError { element: String, deviation: f64 },
    #[error("operands live on different mode spaces")]
    SpaceMismatch,
    #[error("path `{0}` is not declared in the mode space")]
    UnknownPath(String),
    #[error("post-selection left no surviving amplitude")]
    EmptyPostSelection,
    #[error("measurement basis on path `{path}` misses probability {missing:e}")]
    BasisIncomplete { path: String, missing: f64 },
    #[error("invalid qudit dimension {0}")]
    InvalidDimension(usize),
    #[error("subspace index {p} is invalid for dimension {d}")]
    InvalidSubspace { p: usize, d: usize },
    #[error("input state is not normalized (norm^2 = {0})")]
    NotNormalized(f64),
    #[error("state cannot be expressed in the qudit alphabet: {0}")]
    EncodingError(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown preparation recipe `{0}`")]
    UnknownRecipe(String),
    #[error("trace spans only {periods:.2} modulation periods (need at least 10)")]
    InsufficientTrace { periods: f64 },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
