use serde::Serialize;
use thiserror::Error;
use tree_carleman::Error as CoreError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("input not found: {0}")]
    NotFound(String),
    #[error("io: {0}")]
    Io(String),
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Check(String),
}

#[derive(Debug, Serialize)]
pub struct ErrorReport<'a> {
    pub error: &'a str,
    pub message: String,
    pub exit_code: i32,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::NotFound(_) | CliError::Io(_) => 1,
            CliError::Invalid(_) => 2,
            CliError::Check(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::NotFound(_) => "input not found",
            CliError::Io(_) => "io",
            CliError::Invalid(_) => "invalid input",
            CliError::Check(_) => "check failure",
        }
    }

    pub fn report(&self) -> ErrorReport<'_> {
        ErrorReport { error: self.kind(), message: self.to_string(), exit_code: self.exit_code() }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Io(io) => CliError::Io(io.to_string()),
            CoreError::NearSingular { .. }
            | CoreError::Singular(_)
            | CoreError::Unstable { .. }
            | CoreError::TailBound { .. }
            | CoreError::ReconstructionStalled { .. } => CliError::Check(e.to_string()),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
