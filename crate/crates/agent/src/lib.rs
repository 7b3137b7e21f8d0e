//! Conversational change-analysis agent: a tool registry over the canopy analytics, a
//! chat loop that drives it through a pluggable backend, and the HTTP API for the
//! workbench.

pub mod backend;
pub mod config;
pub mod error;
pub mod exec;
pub mod http;
pub mod orchestrator;
pub mod session;
pub mod tools;

pub use backend::{ChatBackend, ChatMessage, RemoteBackend, RemoteConfig, Role, ScriptedBackend};
pub use config::{BackendConfig, BackendKind};
pub use error::AgentError;
pub use http::{router, serve, AppState, ServeConfig};
pub use orchestrator::{handle_chat, system_prompt, ChatReply, MAX_ROUNDS};
pub use session::{Session, SessionStore, TranscriptEntry};
