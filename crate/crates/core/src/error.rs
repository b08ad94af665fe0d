use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("no convergence after {iterations} iterations (last bracket [{lo}, {hi}]): {reason}")]
    NonConvergence {
        iterations: usize,
        lo: f64,
        hi: f64,
        reason: String,
    },

    #[error("singular Gram matrix (lambda_min = {lambda_min:e})")]
    SingularGram { lambda_min: f64 },

    #[error("regression solver stalled at ||h|| = {h_norm:e} after {iterations} iterations")]
    Stalled { iterations: usize, h_norm: f64 },

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for failures of a numerical procedure, as opposed to bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. }
                | Error::SingularGram { .. }
                | Error::Stalled { .. }
                | Error::DegenerateSample(_)
                | Error::Internal(_)
        )
    }
}
