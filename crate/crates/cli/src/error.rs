use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("io: {0}")]
    Io(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },
    #[error("numerical abort: {0}")]
    Numerical(einstein_euler::Error),
    #[error("checks failed: {}", .0.join(", "))]
    CheckFailed(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Parse { .. } => 2,
            CliError::Validation { .. } => 3,
            CliError::Numerical(_) => 4,
            CliError::CheckFailed(_) => 5,
        }
    }

    pub fn invalid(field: &str, e: impl ToString) -> Self {
        CliError::Validation { field: field.into(), message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Errors raised while preparing a run are validation failures; the rest abort it.
pub fn numerical(e: einstein_euler::Error) -> CliError {
    match e {
        einstein_euler::Error::Io(m) => CliError::Io(m),
        other => CliError::Numerical(other),
    }
}
