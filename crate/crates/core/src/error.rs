use thiserror::Error;

/// Errors raised by mesh construction, assembly, and the linear solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate triangle {index}: signed area {area:e}")]
    DegenerateTriangle { index: usize, area: f64 },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("mesh hierarchy mismatch: {0}")]
    HierarchyMismatch(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric positive definite (pivot {pivot:e} at row {row})")]
    NotSpd { row: usize, pivot: f64 },

    #[error("PCG breakdown at iteration {iteration}: curvature {curvature:e}")]
    Breakdown { iteration: usize, curvature: f64 },

    #[error("evaluation point coincides with a panel endpoint of segment {segment}")]
    SingularEvaluation { segment: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("missing key: {0}")]
    MissingKey(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
