use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid density: {0}")]
    InvalidDensity(String),
    #[error("grid mismatch between operands")]
    GridMismatch,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid uncertainty set: {0}")]
    InvalidSet(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("numeric check failed: {0}")]
    Numeric(String),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("root not bracketed: {0}")]
    NotBracketed(String),
    #[error("spectral integral tail estimate {estimate:e} exceeds tolerance {tolerance:e}")]
    InsufficientRange { estimate: f64, tolerance: f64 },
    #[error("breakdown: {0}")]
    Breakdown(String),
    #[error("sampler produced an infeasible density: {0}")]
    SamplerBug(String),
}
