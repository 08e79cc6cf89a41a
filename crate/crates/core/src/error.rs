use thiserror::Error;

/// Errors raised by the decomposition and inference routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed arguments: ranks out of range, mismatched shapes, unknown labels.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The arguments are well-formed but violate a stated precondition,
    /// e.g. a block that should be row-centered is not.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A numerical routine failed (singular system, degenerate direction).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A permutation replicate failed; carries the replicate index.
    #[error("replicate {index} failed: {source}")]
    Replicate {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    /// True for errors caused by the caller's inputs rather than by the computation.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::InvalidInput(_) | Error::Precondition(_) => true,
            Error::Numerical(_) => false,
            Error::Replicate { source, .. } => source.is_validation(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
