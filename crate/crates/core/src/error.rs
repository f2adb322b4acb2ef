use thiserror::Error;

/// Errors produced by the numerics, the channel model and the optimizer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("series failed to converge: {0}")]
    NoConvergence(String),

    #[error("truncation order would exceed the cap of {cap} terms (tail bound {bound:e} > tolerance {tolerance:e})")]
    Truncation {
        cap: usize,
        bound: f64,
        tolerance: f64,
    },

    #[error("diversity fit: {0}")]
    Fit(String),

    #[error("degenerate problem: {0}")]
    Degenerate(String),
}

impl Error {
    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence(_) | Error::Truncation { .. } | Error::Fit(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
