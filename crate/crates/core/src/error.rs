use thiserror::Error;

/// Errors produced by the simulation core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("atom number mismatch: {left} vs {right}")]
    AtomNumberMismatch { left: usize, right: usize },

    #[error("atom number {n} exceeds the configured maximum {max}")]
    TooLarge { n: usize, max: usize },

    #[error("state is not normalized (norm^2 = {norm_sqr})")]
    NotNormalized { norm_sqr: f64 },

    #[error("degenerate squeezing denominator: <J^n2>^2 + <J^z>^2 = {denominator:e}")]
    DegenerateDenominator { denominator: f64 },

    #[error("Krylov step did not converge: residual {residual:e} at step size {step:e}")]
    KrylovConvergence { residual: f64, step: f64 },

    #[error("eigensolver failed to converge for eigenvalue {index}")]
    EigenConvergence { index: usize },

    #[error("single-mode entropies disagree: {0:?}")]
    EntropyMismatch([f64; 3]),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("at grid index {index}: {source}")]
    AtGridIndex {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
