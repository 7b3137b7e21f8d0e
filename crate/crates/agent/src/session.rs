use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use canopy_core::caption::CaptionSet;
use canopy_core::latent::{MatchParams, ProposalFile};
use canopy_core::raster::{BitemporalPair, ChangeMask};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use tokio::sync::Mutex;

use crate::error::AgentError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "snake_case")]
pub enum TranscriptEntry {
    User { text: String },
    /// Raw backend output, kept verbatim.
    Assistant { text: String },
    ToolCall { tool: String, args: Value },
    ToolResult { tool: String, ok: bool, summary: String, data: Value, artifacts: Vec<String> },
    Final { text: String },
    Error { message: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub content_type: &'static str,
    pub bytes: Arc<Vec<u8>>,
}

#[derive(Default)]
pub struct Session {
    pub id: String,
    pub pair: Option<BitemporalPair>,
    /// Caption supplied with the pair, used as the human reference.
    pub human_caption: Option<String>,
    /// Prediction uploaded alongside the pair.
    pub precomputed_mask: Option<ChangeMask>,
    pub proposals: Option<ProposalFile>,
    pub last_mask: Option<ChangeMask>,
    pub last_captions: Option<CaptionSet>,
    pub params: MatchParams,
    transcript: Vec<TranscriptEntry>,
    artifacts: BTreeMap<String, Artifact>,
    data_dir: Option<PathBuf>,
}

impl Session {
    pub fn new(id: impl Into<String>) -> Self {
        Self { id: id.into(), ..Self::default() }
    }

    pub fn transcript(&self) -> &[TranscriptEntry] {
        &self.transcript
    }

    pub fn push(&mut self, entry: TranscriptEntry) {
        self.transcript.push(entry);
    }

    /// Stores bytes under `<sha256 prefix>.<ext>` and returns the name.
    pub fn store_artifact(&mut self, ext: &str, bytes: Vec<u8>) -> Result<String, AgentError> {
        let digest = hex::encode(Sha256::digest(&bytes));
        let name = format!("{}.{ext}", &digest[..16]);
        if let Some(dir) = &self.data_dir {
            let dir = dir.join(&self.id);
            std::fs::create_dir_all(&dir)?;
            std::fs::write(dir.join(&name), &bytes)?;
        }
        let content_type = content_type(ext);
        self.artifacts.insert(name.clone(), Artifact { name: name.clone(), content_type, bytes: Arc::new(bytes) });
        Ok(name)
    }

    pub fn artifact(&self, name: &str) -> Option<&Artifact> {
        self.artifacts.get(name)
    }

    pub fn artifact_names(&self) -> impl Iterator<Item = &str> {
        self.artifacts.keys().map(String::as_str)
    }

    /// Clears everything derived from the previous pair.
    pub fn reset_pair(&mut self, pair: BitemporalPair) {
        self.pair = Some(pair);
        self.precomputed_mask = None;
        self.human_caption = None;
        self.last_mask = None;
        self.last_captions = None;
    }
}

fn content_type(ext: &str) -> &'static str {
    match ext {
        "png" => "image/png",
        "json" => "application/json",
        "csv" => "text/csv",
        _ => "application/octet-stream",
    }
}

pub type SessionHandle = Arc<Mutex<Session>>;

/// All live sessions. Each session sits behind its own async mutex, so one session runs
/// one tool at a time while different sessions proceed independently.
#[derive(Clone, Default)]
pub struct SessionStore {
    sessions: Arc<RwLock<HashMap<String, SessionHandle>>>,
    data_dir: Option<PathBuf>,
}

impl SessionStore {
    pub fn new(data_dir: Option<PathBuf>) -> Self {
        Self { sessions: Arc::default(), data_dir }
    }

    pub fn create(&self) -> String {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let mut session = Session::new(id.clone());
        session.data_dir = self.data_dir.clone();
        self.sessions.write().expect("session map poisoned").insert(id.clone(), Arc::new(Mutex::new(session)));
        id
    }

    pub fn get(&self, id: &str) -> Result<SessionHandle, AgentError> {
        self.sessions
            .read()
            .expect("session map poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| AgentError::SessionNotFound(id.to_string()))
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("session map poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
