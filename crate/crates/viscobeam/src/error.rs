//! Error taxonomy shared by every module.

use thiserror::Error;

/// Unified error type for the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A point fell outside the domain of validity of a field or kernel.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inconsistent arguments (length mismatches, bad counts, ...).
    #[error("argument error: {0}")]
    Argument(String),

    /// Bad run configuration (CFL violation, missing file, bad column, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// An iteration failed to converge within its budget.
    #[error("convergence error: {0}")]
    Convergence(String),

    /// A linear operator that must be invertible degenerated.
    #[error("singular operator: {0}")]
    SingularOperator(String),

    /// Riccati positivity loss, NaN detection, step-size underflow, ...
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A ray stayed inside the domain beyond the travel-time cap.
    #[error("trapped ray: {0}")]
    TrappedRay(String),

    /// Sampling too coarse for the requested oscillation scale.
    #[error("resolution error: {0}")]
    Resolution(String),

    /// Hankel system too ill-conditioned to identify parameters.
    #[error("identifiability error: {0}")]
    Identifiability(String),

    /// Requested feature outside the implemented envelope.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Source support violates the exterior-data model.
    #[error("data-model violation: {0}")]
    DataModel(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
