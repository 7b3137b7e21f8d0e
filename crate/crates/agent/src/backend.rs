use std::time::Duration;

use async_trait::async_trait;
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::AgentError;
use crate::tools;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self { role, content: content.into() }
    }
}

/// Prefix of the user-role messages that carry tool results back to the model.
pub const TOOL_RESULT_PREFIX: &str = "TOOL_RESULT ";
/// Prefix of the user-role messages that ask the model to fix its last reply.
pub const REPAIR_PREFIX: &str = "FORMAT_ERROR ";

#[async_trait]
pub trait ChatBackend: Send + Sync {
    /// Returns the raw text of the next assistant message.
    async fn complete(&self, messages: &[ChatMessage]) -> Result<String, AgentError>;

    fn name(&self) -> &'static str;
}

/// Offline backend: maps the user's words to a fixed tool plan with regular expressions,
/// then answers with the tool summaries verbatim.
pub struct ScriptedBackend {
    intents: Vec<(Regex, &'static str)>,
    point: Regex,
}

impl Default for ScriptedBackend {
    fn default() -> Self {
        let rx = |p: &str| Regex::new(&format!("(?i){p}")).expect("static pattern");
        Self {
            intents: vec![
                (rx(r"zero.?shot|latent|proposal"), tools::DETECT_ZEROSHOT),
                (rx(r"\bpoints?\b|\bclick"), tools::POINT_QUERY),
                (rx(r"\bdetect|\bmask\b|\bsegment"), tools::DETECT_SUPERVISED),
                (rx(r"caption|describe|description"), tools::CAPTION),
                (rx(r"percent|how much|proportion|\barea\b"), tools::PERCENTAGE),
                (rx(r"\bcount|how many|number of"), tools::COUNT_PATCHES),
                (rx(r"ground.?truth|compare|\biou\b|accuracy"), tools::COMPARE_GT),
            ],
            point: Regex::new(r"\(\s*(\d+)\s*,\s*(\d+)\s*(?:,\s*(t1|t2)\s*)?\)").expect("static pattern"),
        }
    }
}

pub const GREETING: &str = "Hello! I can detect forest change in the loaded image pair, describe it in words, \
estimate the deforested percentage, count cleared patches and compare against a ground-truth mask.";

impl ScriptedBackend {
    /// Tool calls for a user message, in a fixed order.
    pub fn plan(&self, message: &str) -> Vec<(&'static str, Value)> {
        let mut plan = Vec::new();
        for (rx, tool) in &self.intents {
            if !rx.is_match(message) {
                continue;
            }
            if *tool == tools::POINT_QUERY {
                let points: Vec<Value> = self
                    .point
                    .captures_iter(message)
                    .map(|c| {
                        json!({
                            "row": c[1].parse::<u64>().unwrap_or(0),
                            "col": c[2].parse::<u64>().unwrap_or(0),
                            "time": c.get(3).map_or("t1", |m| m.as_str()),
                        })
                    })
                    .collect();
                if points.is_empty() {
                    continue;
                }
                plan.push((*tool, json!({ "points": points })));
                continue;
            }
            // Detection is implied by a point query or zero-shot request.
            if *tool == tools::DETECT_SUPERVISED
                && plan.iter().any(|(t, _)| *t == tools::DETECT_ZEROSHOT || *t == tools::POINT_QUERY)
            {
                continue;
            }
            plan.push((*tool, json!({})));
        }
        plan
    }
}

#[async_trait]
impl ChatBackend for ScriptedBackend {
    async fn complete(&self, messages: &[ChatMessage]) -> Result<String, AgentError> {
        let turn_start = messages
            .iter()
            .rposition(|m| {
                m.role == Role::User
                    && !m.content.starts_with(TOOL_RESULT_PREFIX)
                    && !m.content.starts_with(REPAIR_PREFIX)
            })
            .ok_or_else(|| AgentError::Backend("no user message".into()))?;
        let results: Vec<Value> = messages[turn_start + 1..]
            .iter()
            .filter_map(|m| m.content.strip_prefix(TOOL_RESULT_PREFIX))
            .filter_map(|s| serde_json::from_str(s).ok())
            .collect();
        let plan = self.plan(&messages[turn_start].content);
        if plan.is_empty() {
            return Ok(json!({ "final": GREETING }).to_string());
        }
        if let Some((tool, args)) = plan.get(results.len()) {
            return Ok(json!({ "tool": tool, "args": args }).to_string());
        }
        let text: Vec<String> = results
            .iter()
            .map(|r| match r["ok"].as_bool() {
                Some(true) => r["summary"].as_str().unwrap_or_default().to_string(),
                _ => format!("{} failed: {}", r["tool"].as_str().unwrap_or("tool"), r["summary"].as_str().unwrap_or("")),
            })
            .collect();
        Ok(json!({ "final": text.join(" ") }).to_string())
    }

    fn name(&self) -> &'static str {
        "scripted"
    }
}

#[derive(Clone, Debug)]
pub struct RemoteConfig {
    pub api_base: String,
    pub api_key: Option<String>,
    pub model: String,
    pub timeout: Duration,
}

/// Client for an OpenAI-compatible `/chat/completions` endpoint.
pub struct RemoteBackend {
    config: RemoteConfig,
    client: reqwest::Client,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Result<Self, AgentError> {
        let client = reqwest::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| AgentError::Backend(e.to_string()))?;
        Ok(Self { config, client })
    }
}

#[async_trait]
impl ChatBackend for RemoteBackend {
    async fn complete(&self, messages: &[ChatMessage]) -> Result<String, AgentError> {
        let url = format!("{}/chat/completions", self.config.api_base.trim_end_matches('/'));
        let body = json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": 0,
        });
        let mut req = self.client.post(&url).json(&body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().await.map_err(|e| AgentError::Backend(e.to_string()))?;
        let status = resp.status();
        let payload: Value = resp.json().await.map_err(|e| AgentError::Backend(e.to_string()))?;
        if !status.is_success() {
            return Err(AgentError::Backend(format!("{status}: {payload}")));
        }
        payload["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| AgentError::Backend(format!("response has no message content: {payload}")))
    }

    fn name(&self) -> &'static str {
        "remote"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plans_follow_intents() {
        let b = ScriptedBackend::default();
        let names = |m: &str| b.plan(m).into_iter().map(|(t, _)| t).collect::<Vec<_>>();
        assert_eq!(names("what percentage of the area was deforested"), [tools::PERCENTAGE]);
        assert_eq!(names("hello"), Vec::<&str>::new());
        assert_eq!(names("detect changes and describe them"), [tools::DETECT_SUPERVISED, tools::CAPTION]);
        assert_eq!(names("How many patches were cleared?"), [tools::COUNT_PATCHES]);
        let pq = b.plan("find changes like the points (10, 12) and (40, 3, t2)");
        assert_eq!(pq.len(), 1);
        assert_eq!(pq[0].1["points"][1], json!({"row": 40, "col": 3, "time": "t2"}));
    }

    #[tokio::test]
    async fn scripted_turn_walks_the_plan() {
        let b = ScriptedBackend::default();
        let mut msgs = vec![ChatMessage::new(Role::User, "count the patches")];
        let first: Value = serde_json::from_str(&b.complete(&msgs).await.unwrap()).unwrap();
        assert_eq!(first["tool"], tools::COUNT_PATCHES);
        msgs.push(ChatMessage::new(Role::Assistant, first.to_string()));
        let result = json!({"tool": tools::COUNT_PATCHES, "ok": true, "summary": "Found 3 cleared patches."});
        msgs.push(ChatMessage::new(Role::User, format!("{TOOL_RESULT_PREFIX}{result}")));
        let last: Value = serde_json::from_str(&b.complete(&msgs).await.unwrap()).unwrap();
        assert_eq!(last["final"], "Found 3 cleared patches.");
    }
}
