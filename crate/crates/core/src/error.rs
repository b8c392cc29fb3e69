use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("line {line}: malformed entry: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("line {line}: feature indices must be strictly increasing ({prev} followed by {next})")]
    NonIncreasingIndex { line: usize, prev: usize, next: usize },
    #[error("line {line}: non-numeric value `{token}`")]
    NonNumeric { line: usize, token: String },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite parameter at coordinate {0}")]
    NonFiniteParameter(usize),
    #[error("invalid model: {0}")]
    InvalidModel(&'static str),
    #[error("{0} is not available for the mlp model (no global smoothness constant)")]
    UnsupportedForMlp(&'static str),
    #[error("invalid argument `{name}`: {msg}")]
    InvalidArgument { name: &'static str, msg: String },
    #[error("fixed-point iteration did not converge within {0} iterations")]
    NoConvergence(usize),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, msg: impl Into<String>) -> Self {
        Error::InvalidArgument { name, msg: msg.into() }
    }
}
