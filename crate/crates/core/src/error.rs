use thiserror::Error;

use crate::kernel::KernelError;

/// Construction and runtime faults of the converter/controller models.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> ModelError {
    ModelError::InvalidParameter {
        field,
        reason: reason.into(),
    }
}
