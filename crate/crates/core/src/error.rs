use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {0}x{1}")]
    NotSquare(usize, usize),

    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),

    #[error("trace is {0}, expected 1")]
    InvalidTrace(f64),

    #[error("channel is not trace preserving (deviation {0:.3e})")]
    NotTracePreserving(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("support condition violated: relative entropy is infinite")]
    InfiniteDivergence,

    #[error("quadrature did not converge: partial estimate {estimate} with error {error:.3e}")]
    QuadratureNotConverged { estimate: f64, error: f64 },

    #[error("no a-priori gap bound available: {0}")]
    NoAPrioriBound(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("problem is infeasible: {0}")]
    Infeasible(String),

    #[error("certification unavailable: {0}")]
    CertificationUnavailable(String),

    #[error("mismatched problems: {0}")]
    Mismatch(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
