use graphaudit::audit::AuditError;
use graphaudit::frontend::FrontendError;
use graphaudit::query::SyntaxError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config {path}: {reason}")]
    Config { path: String, reason: String },
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
    #[error(transparent)]
    Audit(#[from] AuditError),
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error("query {0}")]
    Syntax(#[from] SyntaxError),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            reason: err.to_string(),
        }
    }
}
