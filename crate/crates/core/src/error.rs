use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A model, kernel or level distribution violates one of its invariants.
    #[error("invalid {field}: {reason}")]
    Validation { field: &'static str, reason: String },

    /// A function evaluated inside a series returned a non-finite value.
    #[error("non-finite value at k = {k} while evaluating {what}")]
    NonFinite { what: &'static str, k: u64 },

    /// A Poisson series did not meet its truncation rule before the iteration cap.
    #[error("series for {what} did not converge within {cap} terms")]
    NoConvergence { what: &'static str, cap: u64 },

    /// The requested (kernel, regime, method) combination has no defined formula.
    #[error("unsupported combination: {0}")]
    Unsupported(String),

    /// The moment summary has a non-positive conditioned variance.
    #[error("degenerate variance: sigma_N^2 = {0}")]
    DegenerateVariance(f64),

    /// Exact enumeration would visit more compositions than the cap allows.
    #[error("enumeration needs {count} compositions, cap is {cap}")]
    TooLarge { count: f64, cap: u64 },

    /// The series path and an exact closed form disagree.
    #[error("cross-check failed for {what}: series {series} vs closed form {closed}")]
    CrossCheck {
        what: &'static str,
        series: f64,
        closed: f64,
    },

    /// An input stream ended before enough accepted words were read.
    #[error("input exhausted after {consumed} words ({accepted} of {needed} accepted)")]
    Exhausted {
        consumed: u64,
        accepted: u64,
        needed: u64,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::Validation {
        field,
        reason: reason.into(),
    }
}
