use thiserror::Error;

/// Errors raised by the analytic model and its numeric kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "quadrature did not converge: achieved error {achieved:.3e}, requested {requested:.3e}"
    )]
    Quadrature { achieved: f64, requested: f64 },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("connection state is unreachable at this step")]
    UnreachableState,

    #[error("invalid config field `{field}`: {message}")]
    InvalidConfig { field: String, message: String },
}

impl ModelError {
    pub(crate) fn invalid(field: &str, message: impl Into<String>) -> Self {
        ModelError::InvalidConfig {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, ModelError>;
