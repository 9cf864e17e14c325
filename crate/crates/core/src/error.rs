use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("invalid repository reference {0:?}, expected owner/name")]
    InvalidRepo(String),
    #[error("invalid commit sha {0:?}, expected 40 lowercase hex characters")]
    InvalidSha(String),
}

/// Failures surfaced by a forge gateway.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("unknown team {0:?}")]
    UnknownTeam(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("merge conflict")]
    MergeConflict,
    #[error("permission denied: {0}")]
    PermissionDenied(String),
    /// Network trouble, throttling that outlived the retries, 5xx responses.
    #[error("transient forge error: {0}")]
    Transient(String),
    #[error("unexpected forge response: {0}")]
    Protocol(String),
    #[error("invalid request: {0}")]
    Invalid(String),
}

impl GatewayError {
    pub fn is_transient(&self) -> bool {
        matches!(self, GatewayError::Transient(_))
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("a workflow named {0:?} is already registered")]
    DuplicateWorkflow(String),
}
