use thiserror::Error;

/// Failures raised by the estimation, fusion and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("every particle log-weight is -inf; the distribution cannot be normalized")]
    AllWeightsZero,

    #[error("degenerate particle set: need at least 2 particles, got {0}")]
    DegenerateSet(usize),

    #[error("all GNSS votes underflowed for every particle; the cloud is inconsistent with every measurement")]
    DegenerateVotes,

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("epoch {epoch}: {source}")]
    AtEpoch { epoch: usize, source: Box<Error> },

    #[error("satellite geometry is singular or too weak (GDOP {0})")]
    SingularGeometry(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
