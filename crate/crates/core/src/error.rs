use thiserror::Error;

/// Errors raised by the numerical engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The model parameters do not describe a valid spectrally negative process.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// An argument lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical procedure failed to meet its tolerance.
    #[error("numeric failure in {context}: residual {residual:e}")]
    NumericFailure { context: String, residual: f64 },

    /// The operation is not available for this model class.
    #[error("unsupported operation: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn numeric(context: impl Into<String>, residual: f64) -> Self {
        Error::NumericFailure {
            context: context.into(),
            residual,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
