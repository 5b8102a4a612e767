use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an operation's arguments was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Two containers that must agree in shape do not.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A user appears in the validation or test split without any training history.
    #[error("cold-start user {user}: present in {split} but absent from train")]
    ColdStartUser { user: u32, split: &'static str },

    /// A feature matrix contains NaN or infinite entries.
    #[error("non-finite feature value at row {row}, column {col}")]
    NonFiniteFeature { row: usize, col: usize },

    /// A numeric input to an operation was NaN or infinite.
    #[error("non-finite input: {0}")]
    NonFiniteInput(String),

    /// Negative sampling could not find a non-interacted item.
    #[error("negative sampling exhausted for user {user}")]
    SamplingExhausted { user: u32 },

    /// A gradient became NaN or infinite during training.
    #[error("non-finite gradient in {0}")]
    NonFiniteGradient(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// A text file could not be parsed; `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A binary file has a bad magic, is truncated, or is internally inconsistent.
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
