use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("potential minimum is {offset:e}, expected 0 (shift the potential first)")]
    NotNormalized { offset: f64 },

    #[error("energy {energy} lies below the potential value {potential} at q = {q}")]
    EnergyBelowPotential { q: f64, energy: f64, potential: f64 },

    #[error("quadrature did not converge: estimate {estimate:e}, error {error:e}")]
    Quadrature { estimate: f64, error: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("sparse factorization failed: {0}")]
    Factorization(String),

    #[error("GMRES did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("eigenvalue computation failed: {0}")]
    Eigen(String),

    #[error("no parameter tuple certifies a positive bound over the grid")]
    NoCertificate,

    #[error("simulation blew up at step {step} (path {path})")]
    BlowUp { step: usize, path: usize },

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
