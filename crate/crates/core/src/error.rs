use thiserror::Error;

/// Errors raised by the simulator, the policy and the trainers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate geometry: transmitter {tx} coincides with receiver {rx}")]
    DegenerateGeometry { tx: usize, rx: usize },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("forward trace does not match the parameters or channel it is used with")]
    TraceMismatch,

    #[error("empty batch")]
    EmptyBatch,

    #[error("empty input")]
    EmptyInput,

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("module index {index} out of range for a set of {modules} modules")]
    IndexOutOfRange { index: usize, modules: usize },

    #[error("search space of {size} assignments exceeds the cap of {cap}")]
    SearchSpaceTooLarge { size: u128, cap: u128 },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("reference rate must be positive, got {0}")]
    NonpositiveReference(f64),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    pub(crate) fn shape(expected: impl ToString, actual: impl ToString) -> Self {
        Error::ShapeMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
