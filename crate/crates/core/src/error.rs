use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("point must have at least one coordinate")]
    EmptyPoint,

    #[error("coordinate {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("operator index {index} out of range 1..={count}")]
    IndexOutOfRange { index: usize, count: usize },

    #[error("invalid index vector: {0}")]
    InvalidIndexVector(String),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("string family is not fit: missing indices {missing:?}")]
    NotFit { missing: Vec<usize> },

    #[error("duplicate string {0:?} in family")]
    DuplicateString(Vec<usize>),

    #[error("invalid M* bounds: {0}")]
    InvalidBounds(String),

    #[error("point is not a fixed point of the operator (residual {residual:e})")]
    NotFixed { residual: f64 },

    #[error("steering coefficient {0} outside [0, 1]")]
    LambdaOutOfRange(f64),

    #[error("invalid steering sequence: {0}")]
    InvalidSteering(String),

    #[error("truncation tolerance {0} outside (0, 1)")]
    InvalidEpsilon(f64),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid algorithm variant: {0}")]
    InvalidVariant(String),

    #[error("iterate became non-finite at k = {k}")]
    Diverged { k: usize },

    #[error("oracle: {0}")]
    Oracle(String),
}
