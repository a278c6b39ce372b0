use thiserror::Error;

/// Errors produced by training, prediction, and evaluation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not square: {rows} rows, {cols} cols")]
    NonSquare { rows: usize, cols: usize },
    #[error("asymmetry at ({i}, {j}) exceeds tolerance")]
    AsymmetryExceedsTolerance { i: usize, j: usize },
    #[error("non-finite entry at ({i}, {j})")]
    NonFiniteEntry { i: usize, j: usize },
    #[error("index {index} out of range for {len} items")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("left and right samples do not partition the parent")]
    NotAPartition,
    #[error("feature vector has {got} coordinates, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unknown leaf id {0}")]
    UnknownLeaf(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("no pair is out of bag for any tree")]
    NoCoveredPairs,
    #[error("forest was not trained in regression-reduction mode")]
    NotInReductionMode,
    #[error("forest carries no training distance matrix")]
    MissingTrainingDistances,
    #[error("scores contain a single class only")]
    SingleClass,
    #[error("no positive labels")]
    NoPositives,
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("empty hyperparameter grid")]
    EmptyGrid,
    #[error("{0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
