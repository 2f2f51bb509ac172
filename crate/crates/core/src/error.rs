use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Malformed arguments: bad dimensions, infeasible configurations, invalid bounds.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An observation lies outside the support of a segment family.
    #[error("observation{} outside support of {family}: {detail}", index.map(|i| format!(" at index {i}")).unwrap_or_default())]
    OutOfSupport {
        family: String,
        index: Option<usize>,
        detail: String,
    },

    /// Parameter values outside the declared box or invalid for the family.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// An optimizer failed to converge; carries the best iterate found.
    #[error("optimization failed: {detail} (gradient norm {grad_norm:.3e})")]
    Optimization {
        detail: String,
        best: Vec<f64>,
        grad_norm: f64,
    },

    /// Numerical integration did not reach the requested tolerance.
    #[error("integration error: {detail} (achieved tolerance {achieved:.3e})")]
    Integration { detail: String, achieved: f64 },

    /// Adjacent segment distributions are indistinguishable (identifiability
    /// precheck found a non-negative separation constant).
    #[error("identifiability error: {0}")]
    Identifiability(String),

    /// Non-finite value produced at a specific observation.
    #[error("numeric error at observation {index}: {detail}")]
    Numeric { index: usize, detail: String },

    /// The information matrix is singular or too ill-conditioned to invert.
    #[error("singular information matrix (condition number {condition:.3e}); check boundary and identifiability diagnostics")]
    Singular { condition: f64 },

    /// Problem too large for an exhaustive routine.
    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    /// A probed inequality was violated.
    #[error("inequality check failed: {0}")]
    CheckFailed(String),

    /// An internal invariant was breached; indicates a bug.
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid_input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn parameter(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }
}
