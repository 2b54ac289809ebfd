//! Error type shared across the crate.

use thiserror::Error;

/// Errors surfaced by covariance construction, data generation, estimation,
/// and the asymptotic-theory engine.
#[derive(Debug, Error)]
pub enum HdError {
    #[error("matrix block is not positive definite: {0}")]
    NonPositiveDefinite(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("block index {index} out of range (K = {k})")]
    IndexOutOfRange { index: usize, k: usize },

    #[error("column {0} has zero sample variance after resampling")]
    DegenerateColumn(usize),

    #[error("invalid sparsity: m = {m} must satisfy 1 <= m <= p = {p}")]
    InvalidSparsity { m: usize, p: usize },

    #[error("genetic component is identically zero but h2 target is positive")]
    ZeroGeneticVariance,

    #[error("grouping is not a partition of 1..p: {0}")]
    BadGrouping(String),

    #[error("linear solve failed: {0}")]
    SolveFailure(String),

    #[error("group is rank deficient: {0}")]
    RankDeficient(String),

    #[error("fixed-point function does not change sign on the bracket: {0}")]
    NoRoot(String),

    #[error("fixed-point residual {residual:e} above tolerance after {iterations} iterations")]
    ToleranceNotMet { residual: f64, iterations: usize },

    #[error("degenerate denominator in accuracy formula: |{0:e}| below threshold")]
    DivisionDegenerate(f64),

    #[error("prediction vector has near-zero norm; out-of-sample accuracy undefined")]
    ZeroPrediction,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("csv import failed: {0}")]
    CsvImport(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
