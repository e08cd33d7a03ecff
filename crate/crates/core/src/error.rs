use thiserror::Error;

/// Failure categories shared by every module. The CLI maps these onto exit codes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed or out-of-range input (bad symbol, bad file, bad literal).
    #[error("input error: {0}")]
    Input(String),
    /// The shift does not have the structure an operation needs.
    #[error("structural error: {0}")]
    Structural(String),
    /// An enumeration would exceed the configured word budget.
    #[error("resource error: {0}")]
    Resource(String),
    /// The operation is not defined for this kind of input.
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// A stated hypothesis of a check could not be verified.
    #[error("precondition failed: {0}")]
    Precondition(String),
    /// A parameter lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),
    /// A Moran build could not be assembled.
    #[error("build error: {0}")]
    Build(String),
    /// An internal consistency check failed; indicates a bug.
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
