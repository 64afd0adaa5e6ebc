use esskit_lp::{LpError, LpStatus};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    /// A precondition on the inputs does not hold.
    #[error("{0}")]
    Contract(String),
    #[error("{what} has length {got}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("linear program is {0}")]
    NotOptimal(LpStatus),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = CoreError> = std::result::Result<T, E>;

pub(crate) fn contract(msg: impl Into<String>) -> CoreError {
    CoreError::Contract(msg.into())
}
