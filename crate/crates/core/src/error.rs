use thiserror::Error;

/// Errors produced by the game, solver, population and orchestration layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dimension: {0} (must be at least 1)")]
    InvalidDimension(usize),

    #[error("shape mismatch: expected length {expected}, found {found}")]
    Shape { expected: usize, found: usize },

    #[error("matrix is not antisymmetric at ({row}, {col}): {value} vs {mirror}")]
    NotAntisymmetric {
        row: usize,
        col: usize,
        value: f64,
        mirror: f64,
    },

    #[error("payoff {value} at ({row}, {col}) outside [-1, 1]")]
    PayoffOutOfRange { row: usize, col: usize, value: f64 },

    #[error("not a probability vector: {0}")]
    NotSimplex(String),

    #[error("unknown fixture game {0:?}")]
    UnknownFixture(String),

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("duplicate index {0}")]
    DuplicateIndex(usize),

    #[error("game too large: dimension {dim} exceeds limit {limit}")]
    TooLarge { dim: usize, limit: usize },

    #[error("invalid state: {0}")]
    State(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
