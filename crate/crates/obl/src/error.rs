use std::fmt;

/// Failure of a command, carrying its exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad input: malformed files, invalid curves, unmet preconditions.
    Validation(String),
    /// A numerical routine failed on valid input.
    Numerical { operation: String, detail: String },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical { .. } => 3,
        }
    }

    /// Classifies a core error raised by `operation`.
    pub fn core(operation: &str, err: obl_core::Error) -> Self {
        if err.is_validation() {
            CliError::Validation(format!("{operation}: {err}"))
        } else {
            CliError::Numerical {
                operation: operation.to_string(),
                detail: err.to_string(),
            }
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(msg) => write!(f, "invalid input: {msg}"),
            CliError::Numerical { operation, detail } => write!(f, "numerical failure in {operation}: {detail}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
