use alloc::string::String;

/// Errors raised by the analysis and simulation kernels.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument fell outside the domain of a function.
    #[error("domain error in {function}: {detail}")]
    Domain { function: &'static str, detail: String },

    /// A configuration violated one of its invariants.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// An operation was called with inputs that do not satisfy its precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Adaptive quadrature or a series failed to reach its tolerance.
    #[error("numerical failure in {routine}: {detail}")]
    NonConvergence { routine: &'static str, detail: String },
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(function: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            function,
            detail: detail.into(),
        }
    }

    pub(crate) fn config(detail: impl Into<String>) -> Self {
        Error::InvalidConfig(detail.into())
    }

    pub(crate) fn precondition(detail: impl Into<String>) -> Self {
        Error::Precondition(detail.into())
    }

    pub(crate) fn non_convergence(routine: &'static str, detail: impl Into<String>) -> Self {
        Error::NonConvergence {
            routine,
            detail: detail.into(),
        }
    }

    /// True for errors caused by bad inputs rather than numerical trouble.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::NonConvergence { .. })
    }
}
