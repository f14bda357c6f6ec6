use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("tolerance {tol:e} not reachable within {terms} terms (enclosure width {width:e})")]
    ToleranceNotReachable { tol: f64, terms: usize, width: f64 },

    #[error("convergence error: {0}")]
    Convergence(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("quadrature error: {0}")]
    Quadrature(String),

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("support violation: {0}")]
    SupportViolation(String),

    #[error("divergent integral: {0}")]
    Divergence(String),

    #[error("indefinite quadratic form at this resolution; refine the mesh ({0})")]
    IndefiniteForm(String),

    #[error("zero denominator in Rayleigh quotient")]
    ZeroDenominator,

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("invalid value for `{field}`: {reason}")]
    Validation { field: String, reason: String },
}

impl LabError {
    pub fn domain(msg: impl Into<String>) -> Self {
        LabError::Domain(msg.into())
    }

    pub fn invalid(field: &str, reason: impl Into<String>) -> Self {
        LabError::Validation { field: field.to_string(), reason: reason.into() }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
