use thiserror::Error;

/// Errors raised by the numerical kernels, solvers and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot:e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("direction subproblem stalled after {iterations} dual iterations (projected gradient {residual:e})")]
    SubproblemStalled { iterations: usize, residual: f64 },

    #[error("line search failed after {trials} trials")]
    LineSearchFailed { trials: usize },

    #[error("non-finite value in {what}")]
    NonFiniteValue { what: &'static str },

    #[error("degenerate step: |s| = {norm:e}")]
    DegenerateStep { norm: f64 },

    #[error("curvature condition violated: {value:e} <= 0")]
    CurvatureViolation { value: f64 },

    #[error("empty front")]
    EmptyFront,

    #[error("degenerate front: {points} point(s), need at least 2")]
    DegenerateFront { points: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("unknown solver `{0}`")]
    UnknownSolver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config file: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("malformed results bundle: {0}")]
    Bundle(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
