use thiserror::Error;

/// Shape and domain errors raised by the model types.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    Param(String),
}

impl ModelError {
    pub(crate) fn shape(expected: impl ToString, actual: impl ToString) -> Self {
        ModelError::Shape {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;
