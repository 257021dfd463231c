use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("observation {index}: time must be positive, got {time}")]
    NonPositiveTime { index: usize, time: f64 },

    #[error("observation {index}: expected {expected} covariates, found {found}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },

    #[error("observation {index}: interval lower bound {lower} must be below upper bound {upper}")]
    BadInterval {
        index: usize,
        lower: f64,
        upper: f64,
    },

    #[error("observation {index}: covariate {column} is not finite")]
    NonFiniteCovariate { index: usize, column: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("no acceptance within {budget} candidate points")]
    CandidateBudgetExceeded { budget: usize },

    #[error("no admissible pairs for the concordance index")]
    NoAdmissiblePairs,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("non-finite log-likelihood at iteration {iteration}: {context}")]
    NonFiniteLikelihood { iteration: usize, context: String },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: {source}")]
    AtLine { line: usize, source: Box<Error> },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
