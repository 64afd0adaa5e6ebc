use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error("constraint {row} references variable {var} but the problem has {num_vars} variables")]
    VariableOutOfRange { row: usize, var: usize, num_vars: usize },
    #[error("variable {var} has lower bound {lower} above upper bound {upper}")]
    InvertedBounds { var: usize, lower: f64, upper: f64 },
    #[error("{what} has length {got}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("non-finite coefficient in {0}")]
    NonFinite(String),
    #[error("penalty weight must be non-negative, got {0}")]
    NegativeWeight(f64),
    #[error("dump parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("simplex exceeded {0} iterations")]
    IterationLimit(usize),
}
