use thiserror::Error;

/// Errors raised by model construction, enumeration and the verification checks.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// An enumeration would exceed its configured capacity.
    #[error("capacity exceeded: {what} needs {required} states, limit is {limit}")]
    Capacity { what: String, required: u128, limit: u128 },

    /// A check was requested whose hypotheses do not hold.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// The distribution is degenerate (zero variance).
    #[error("degenerate distribution: {0}")]
    Degenerate(String),

    /// Malformed or inconsistent input specification.
    #[error("invalid specification: {0}")]
    Spec(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn capacity(what: impl Into<String>, required: u128, limit: u128) -> Self {
        Error::Capacity {
            what: what.into(),
            required,
            limit,
        }
    }
}
