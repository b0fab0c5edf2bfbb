use thiserror::Error;

/// Errors raised by the library. The CLI maps each variant to an exit code
/// through [`Error::category`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found} ({context})")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: String,
    },

    #[error("non-finite value at {location}")]
    NonFinite { location: String },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("index {index} out of range for support of size {size}")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("empty sample")]
    EmptySample,

    #[error("support size {size} exceeds the limit {limit} for {what}")]
    SupportTooLarge {
        size: usize,
        limit: usize,
        what: &'static str,
    },

    #[error("kernel mismatch: {0}")]
    KernelMismatch(String),

    #[error("{solver} did not converge after {iterations} iterations: {diagnostics}")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        diagnostics: String,
    },

    #[error("replicate with seed {seed:#018x} failed: {source}")]
    Replicate {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("csv {path}: row {row}, column {column}: {reason}")]
    Csv {
        path: String,
        row: usize,
        column: String,
        reason: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coarse classification of errors, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Input,
    Invariant,
    Solver,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::NonConvergence { .. } => ErrorCategory::Solver,
            Error::Replicate { source, .. } => source.category(),
            Error::Invariant(_) => ErrorCategory::Invariant,
            _ => ErrorCategory::Input,
        }
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
