use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("matrix is not symmetric (entry ({row}, {col}) differs by {diff:e})")]
    NotSymmetric { row: usize, col: usize, diff: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("Jacobi eigen solver did not converge after {sweeps} sweeps")]
    ConvergenceFailure { sweeps: usize },
    #[error("degrees of freedom {df} too small for dimension {p}")]
    DfTooSmall { df: usize, p: usize },
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("weight {index} is not a positive finite number ({value})")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error("finite-difference step underflows at theta = {theta:e}")]
    StepUnderflow { theta: f64 },
    #[error("sample {sample} has a singular covariance matrix")]
    RankDeficientSample { sample: usize },
    #[error("dimension p = {p} must be smaller than min(m, n) = {min}")]
    DimensionTooLarge { p: usize, min: usize },
    #[error("variance ratio k must be positive, got {0}")]
    NonPositiveK(f64),
    #[error("statistic is degenerate: {0}")]
    DegenerateStatistic(&'static str),
    #[error("weight vectors are not majorized (psi is not majorized by eta)")]
    NotMajorized,
    #[error("vector lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("eigenvalue gap {gap:e} along the path is below the resolution {limit:e}")]
    DegenerateSpectrum { gap: f64, limit: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("nothing to emit: result set is empty")]
    EmptyResults,
    #[error("malformed results file: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
