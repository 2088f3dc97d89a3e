//! Error type shared by the whole crate.

use thiserror::Error;

/// Everything that can go wrong when assembling or solving a problem.
#[derive(Debug, Error)]
pub enum Error {
    /// An operation received a vector of the wrong length.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A vector or scalar that must be finite contained NaN or an infinity.
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    /// A constructor argument violated its documented range. `name` is
    /// the parameter or config field path.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    /// The requested operation is not defined for this variant.
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// A gradient was requested where the functional is not differentiable.
    #[error("nondifferentiable point: {0}")]
    Nondifferentiable(String),

    /// An iterative solver produced a non-finite objective value.
    #[error("solver diverged at iteration {iteration} ({context})")]
    Divergence { iteration: usize, context: String },

    /// A linear system could not be factorized even after diagonal shifting.
    #[error("singular linear system: {0}")]
    SingularSystem(String),

    /// Reading or writing an artifact failed.
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A weights file or run configuration could not be parsed.
    #[error("malformed input {what}: {detail}")]
    Malformed { what: String, detail: String },
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Shorthand used by operator implementations.
    pub(crate) fn dim(context: &'static str, expected: usize, actual: usize) -> Self {
        Error::DimensionMismatch {
            context,
            expected,
            actual,
        }
    }

    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    /// Rewrites solver failures with the experiment cell they came from;
    /// other variants pass through untouched.
    pub(crate) fn with_run_context(self, context: &str) -> Self {
        match self {
            Error::Divergence { iteration, context: c } => Error::Divergence {
                iteration,
                context: format!("{c}; {context}"),
            },
            Error::SingularSystem(msg) => {
                Error::SingularSystem(format!("{msg}; {context}"))
            }
            other => other,
        }
    }
}
