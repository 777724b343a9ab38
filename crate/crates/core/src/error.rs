use thiserror::Error;

/// Errors raised by the model, solvers and scenario generator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("user index {index} out of range for {count} users")]
    IndexOutOfRange { index: usize, count: usize },

    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("channel gains must be positive and sorted ascending (violation at index {index})")]
    UnsortedGains { index: usize },

    #[error("scenario has no MEC server configured")]
    MissingServer,

    #[error("scenario is infeasible: {0}")]
    Infeasible(String),

    /// No KKT candidate of the two-user closed form is primal feasible; the
    /// bisection solver still applies.
    #[error("closed form unavailable: {0}")]
    ClosedFormUnavailable(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field: field.into(),
        reason: reason.into(),
    }
}
