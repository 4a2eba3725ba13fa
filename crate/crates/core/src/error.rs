use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("{what} budget exceeded (limit {limit})")]
    Budget { what: &'static str, limit: usize },
    #[error("iterative scaling did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },
    #[error("invalid state: {0}")]
    State(&'static str),
    #[error("no supporting configuration left, residual {residual:e}")]
    Decomposition { residual: f64 },
    #[error("round {t} outside 1..={horizon}")]
    OutOfRange { t: usize, horizon: usize },
    #[error("lower-bound estimation failed: {0}")]
    Estimation(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Budget and numerical failures, as opposed to malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Budget { .. } | Error::Convergence { .. } | Error::Decomposition { .. }
        )
    }
}
