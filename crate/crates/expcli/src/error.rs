use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config line {line}: {message}")]
    Parse { line: usize, key: Option<String>, message: String },

    #[error("invalid config: {0}")]
    Validation(String),

    #[error("unknown preset `{0}` (expected one of fig4..fig9)")]
    UnknownPreset(String),

    #[error(transparent)]
    Core(#[from] metapower::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
