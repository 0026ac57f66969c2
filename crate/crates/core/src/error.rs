use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum CantorError {
    #[error("word length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("invalid digit {digit} for alphabet size m={m}")]
    InvalidDigit { digit: u32, m: u32 },

    #[error("invalid space parameters: {0}")]
    InvalidParams(String),

    #[error("level {k} out of range (depth {depth})")]
    LevelOutOfRange { k: usize, depth: usize },

    #[error("operation undefined on an empty set: {0}")]
    EmptySet(&'static str),

    #[error("enumeration would produce {count} assignments, above the cap of {cap}")]
    EnumerationTooLarge { count: String, cap: u64 },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("infeasible construction: {0}")]
    Infeasible(String),

    #[error("integrity check failed: {0}")]
    Integrity(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CantorError>;
