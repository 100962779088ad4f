use thiserror::Error;

/// Errors produced by the recommender pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("unknown item `{0}`")]
    UnknownItem(String),

    #[error("unknown user `{0}`")]
    UnknownUser(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid label {0}: explicit pair labels must be -1 or +1")]
    InvalidLabel(f64),

    #[error("invalid pair ({0}, {1}): {2}")]
    InvalidPair(String, String, &'static str),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("negative coordinate in item vector; geometric mean undefined")]
    NegativeCoordinate,

    #[error("no feedback: objective requires at least one non-zero pair label")]
    NoFeedback,

    #[error("user `{0}` has an empty history")]
    EmptyHistory(String),

    #[error("transition matrix row {row} sums to {sum}, expected 1")]
    NotStochastic { row: usize, sum: f64 },

    #[error("optimizer diverged after {0} restarts")]
    Diverged(usize),

    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("configuration `{0}` requires pair feedback but the logs contain none")]
    MissingPairFeedback(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
