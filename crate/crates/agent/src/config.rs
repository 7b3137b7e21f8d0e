use std::sync::Arc;
use std::time::Duration;

use crate::backend::{ChatBackend, RemoteBackend, RemoteConfig, ScriptedBackend};
use crate::error::AgentError;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BackendKind {
    Remote,
    Scripted,
}

#[derive(Clone, Debug)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub remote: Option<RemoteConfig>,
}

impl BackendConfig {
    /// Reads `WORKBENCH_BACKEND`, `CHAT_API_BASE`, `CHAT_API_KEY` and `CHAT_MODEL`.
    /// Without an explicit choice the remote backend is used when an endpoint is set.
    pub fn from_env() -> Result<Self, AgentError> {
        Self::from_lookup(|k| std::env::var(k).ok().filter(|v| !v.is_empty()))
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self, AgentError> {
        let base = get("CHAT_API_BASE");
        let kind = match get("WORKBENCH_BACKEND").as_deref() {
            Some("remote") => BackendKind::Remote,
            Some("scripted") => BackendKind::Scripted,
            Some(other) => {
                return Err(AgentError::BadRequest(format!(
                    "WORKBENCH_BACKEND must be \"remote\" or \"scripted\", got {other:?}"
                )))
            }
            None if base.is_some() => BackendKind::Remote,
            None => BackendKind::Scripted,
        };
        let remote = match kind {
            BackendKind::Scripted => None,
            BackendKind::Remote => Some(RemoteConfig {
                api_base: base
                    .ok_or_else(|| AgentError::BadRequest("remote backend needs CHAT_API_BASE".into()))?,
                api_key: get("CHAT_API_KEY"),
                model: get("CHAT_MODEL").unwrap_or_else(|| "gpt-4o-mini".into()),
                timeout: DEFAULT_TIMEOUT,
            }),
        };
        Ok(Self { kind, remote })
    }

    pub fn build(&self) -> Result<Arc<dyn ChatBackend>, AgentError> {
        Ok(match &self.remote {
            Some(cfg) if self.kind == BackendKind::Remote => Arc::new(RemoteBackend::new(cfg.clone())?),
            _ => Arc::new(ScriptedBackend::default()),
        })
    }
}
