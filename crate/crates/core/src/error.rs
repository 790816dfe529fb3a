use thiserror::Error;

/// Errors raised by the combination toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A distribution or method parameter is outside its valid range.
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// An input value is outside the domain of the operation.
    #[error("{what}: value {value} is outside the domain")]
    Domain { what: &'static str, value: f64 },

    /// Inputs are inconsistent with each other (lengths, empty lists, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// The operation is not defined for the given calibrator or weights.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A numerical routine failed to reach its target accuracy.
    #[error("numerical failure: {message} (error estimate {estimate:e})")]
    Numerical { message: String, estimate: f64 },
}

impl Error {
    pub(crate) fn domain(what: &'static str, value: f64) -> Self {
        Error::Domain { what, value }
    }

    pub(crate) fn param(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::InvalidParameter { name, value, reason }
    }

    /// True for failures of the numerical kernels, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
