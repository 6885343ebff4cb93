use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("inadmissible problem: tau = {tau} must satisfy 0 <= tau < 1")]
    InadmissibleProblem { tau: f64 },

    #[error("zeta({sigma}) diverges; the decay exponent must exceed 1")]
    DivergentSeries { sigma: f64 },

    #[error("mesh format error at line {line}: {message}")]
    MeshFormat { line: usize, message: String },

    #[error("mesh is not conforming: {0}")]
    NonConforming(String),

    #[error("discrete spaces are not compatible: {0}")]
    SpaceMismatch(String),

    #[error("sparse factorization failed: {0}")]
    Factorization(String),

    /// PCG did not reach the requested tolerance within the iteration cap.
    #[error("solver did not converge after {iterations} iterations (last residual {last:.3e})")]
    SolverFailure {
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },

    /// A monitored identity or bound was violated during an adaptive run.
    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
