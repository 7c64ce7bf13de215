use thiserror::Error;

/// Errors raised by the engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },

    #[error("vectors live on different grids")]
    GridMismatch,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// The quadratic form is singular or its real part is not positive definite.
    #[error("degenerate quadratic form: {0}")]
    Degenerate(String),

    #[error("localization error: {0}")]
    Localization(String),

    #[error("unsupported integrator operation: {0}")]
    Unsupported(String),

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("path development failed: {0}")]
    Development(String),

    #[error("quadrature did not resolve the integrand: {0}")]
    Resolution(String),

    #[error("Legendre transform failed: {0}")]
    Legendre(String),

    #[error("singular linear map: {0}")]
    SingularMap(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { expected, found })
    }
}
