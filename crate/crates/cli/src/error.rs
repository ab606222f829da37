use std::fmt;
use std::path::Path;

use serde::Serialize;

use winprob::eval::EvalError;
use winprob::ingest::IngestError;
use winprob::models::ModelError;
use winprob::ratings::RatingsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKind {
    /// Bad flags or configuration.
    Usage,
    /// Unreadable or invalid input files.
    Input,
    /// Anything else; a bug or a numerical failure.
    Internal,
}

#[derive(Debug, Clone, Serialize)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Usage, message: message.into(), path: None }
    }

    pub fn input(message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Input, message: message.into(), path: None }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Internal, message: message.into(), path: None }
    }

    pub fn at(mut self, path: &Path) -> Self {
        self.path = Some(path.display().to_string());
        self
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Usage | ErrorKind::Input => 2,
            ErrorKind::Internal => 1,
        }
    }

    /// `{"error": {...}}` on one line.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Wrapper<'a> {
            error: &'a CliError,
        }
        serde_json::to_string(&Wrapper { error: self }).unwrap_or_else(|_| format!("{{\"error\":{{\"message\":{:?}}}}}", self.message))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.path {
            Some(p) => write!(f, "{p}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for CliError {}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        CliError::input(e.to_string())
    }
}

impl From<RatingsError> for CliError {
    fn from(e: RatingsError) -> Self {
        match e {
            RatingsError::NoConvergence { .. } | RatingsError::Singular => CliError::internal(e.to_string()),
            other => CliError::input(other.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Io { path, source } => CliError { path: Some(path), ..CliError::input(source.to_string()) },
            ModelError::Json(_) | ModelError::SchemaVersion { .. } | ModelError::WrongModelType { .. } => {
                CliError::input(e.to_string())
            }
            ModelError::Empty
            | ModelError::SingleClass { .. }
            | ModelError::TooFewRows { .. }
            | ModelError::Feature(_) => CliError::input(e.to_string()),
            other => CliError::internal(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::input(e.to_string())
    }
}
