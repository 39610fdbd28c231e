use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("operator construction failed: {0}")]
    Construction(String),
    #[error("operator is not positive definite (smallest eigenvalue {0:e})")]
    NotPositiveDefinite(f64),
    #[error("matrix is singular")]
    Singular,
    #[error("eigen-decomposition did not converge")]
    EigenFailure,
    #[error("quadratic form is negative ({0:e}); Green matrix is broken")]
    NegativeQuadraticForm(f64),
    #[error("Newton iteration diverged after {iterations} iterations (residual {residual:e})")]
    NewtonDivergence { iterations: usize, residual: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("separable profile not found: {0}")]
    ProfileNotFound(String),
    #[error("trajectories do not match: {0}")]
    MismatchedTrajectories(String),
    #[error("boundary fit window holds {0} nodes, need at least 4")]
    TooFewNodes(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
