//! Crate-wide error type.

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("hereditarily finite code exceeds u64")]
    HfOverflow,

    #[error("parse error at byte {offset}: {msg}")]
    Parse { offset: usize, msg: String },

    /// A precondition of an operation does not hold (wrong fragment,
    /// wrong normal form, non-atom argument, and so on).
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Evaluation failed (unknown symbol, missing language context, a
    /// bound term ranging outside the structure, ...).
    #[error("evaluation error: {0}")]
    Eval(String),

    /// A bounded search exhausted its cap without reaching a definite
    /// answer.
    #[error("search cap exceeded: {0}")]
    CapExceeded(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
