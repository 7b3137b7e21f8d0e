use thiserror::Error;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("session {0} not found")]
    SessionNotFound(String),
    #[error("artifact {0} not found")]
    ArtifactNotFound(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    /// A tool could not run in the current session state.
    #[error("{0}")]
    Precondition(String),
    #[error("unknown tool {0:?}")]
    UnknownTool(String),
    #[error("invalid arguments for {tool}: {}", .errors.join("; "))]
    InvalidArgs { tool: String, errors: Vec<String> },
    #[error(transparent)]
    Core(#[from] canopy_core::Error),
    #[error("chat backend unavailable: {0}")]
    Backend(String),
    #[error("backend output malformed after a repair attempt: {0}")]
    MalformedOutput(String),
    #[error("no final answer within {0} rounds")]
    RoundLimit(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
