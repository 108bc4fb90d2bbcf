//! Crate-wide error type.

use thiserror::Error;

use crate::model::ValidationReport;

#[derive(Debug, Error)]
pub enum Error {
    /// A model could not be assembled (unknown labels, missing spaces, ...).
    #[error("model error: {0}")]
    Model(String),

    /// The model file is not valid JSON.
    #[error("syntax error: {0}")]
    Syntax(#[from] serde_json::Error),

    /// The model file parsed but violates the schema invariants.
    #[error("schema violation:\n{0}")]
    Schema(ValidationReport),

    /// A site id outside the volume was passed where a volume site is required.
    #[error("unknown site {0}")]
    UnknownSite(i64),

    /// An enumeration would exceed the configured cap.
    #[error("state-space product {product} exceeds cap {cap}")]
    CapExceeded { product: u128, cap: u128 },

    /// The requested quantity is undefined on this input (empty closure,
    /// singleton component, constant test function, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A stated precondition of the operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A runtime property assertion failed; this signals an implementation
    /// bug or a falsified hypothesis, never a user error.
    #[error("assertion failed: {0}")]
    Assertion(String),

    /// The bisection recursion cannot shrink the input volume.
    #[error("non-terminating recursion: ceil(|L|/2) + N*Delta = {next} >= |L| = {size}")]
    NonTerminating { size: u64, next: u64 },

    /// An observable or measure was paired with a component it does not match.
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 validation, 3 cap, 4 assertion.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Model(_)
            | Error::Syntax(_)
            | Error::Schema(_)
            | Error::UnknownSite(_)
            | Error::Precondition(_)
            | Error::Degenerate(_)
            | Error::DomainMismatch(_)
            | Error::NonTerminating { .. } => 2,
            Error::CapExceeded { .. } => 3,
            Error::Assertion(_) => 4,
            Error::Io(_) => 1,
        }
    }
}
