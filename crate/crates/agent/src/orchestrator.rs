use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::backend::{ChatBackend, ChatMessage, Role, REPAIR_PREFIX, TOOL_RESULT_PREFIX};
use crate::error::AgentError;
use crate::exec::execute_tool;
use crate::session::{Session, TranscriptEntry};
use crate::tools::registry;

pub const MAX_ROUNDS: usize = 6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChatReply {
    pub reply: String,
    /// Transcript entries appended during this turn.
    pub turn: Vec<TranscriptEntry>,
    pub artifacts: Vec<String>,
}

#[derive(Debug, PartialEq)]
enum Step {
    Tool { name: String, args: Value },
    Final(String),
}

pub fn system_prompt() -> String {
    let mut s = String::from(
        "You are a forest change analyst working on one pair of satellite images (time t1 = image A, \
time t2 = image B). You cannot see the images; you act only through tools.\n\n\
Reply with exactly one JSON object and nothing else, either\n\
  {\"tool\": \"<tool name>\", \"args\": {...}}\n\
to run a tool, or\n\
  {\"final\": \"<answer for the user>\"}\n\
to finish. Tool results arrive as messages starting with TOOL_RESULT. Every number in a \
final answer must be copied from a tool result of this turn; never write placeholders.\n\nTools:\n",
    );
    for t in registry() {
        s.push_str(&format!("- {}: {}\n  args schema: {}\n", t.name, t.description, t.schema));
    }
    s.push_str(
        "\nExamples:\n\
User: what percentage of the area was deforested?\n\
Assistant: {\"tool\": \"deforestation_percentage\", \"args\": {}}\n\
User: TOOL_RESULT {\"tool\": \"deforestation_percentage\", \"ok\": true, \"summary\": \"Deforested area: 4.20% of the image (2753 of 65536 pixels).\"}\n\
Assistant: {\"final\": \"About 4.20% of the scene was cleared (2753 pixels).\"}\n\
User: hi\n\
Assistant: {\"final\": \"Hello! Ask me to detect, describe, measure or count forest change.\"}\n",
    );
    s
}

fn placeholder() -> &'static Regex {
    static RX: OnceLock<Regex> = OnceLock::new();
    RX.get_or_init(|| {
        Regex::new(r"(?i)\{\{[^}]*\}\}|<(number|value|percentage|percent|count|result|x)>|\[(number|value|percentage|percent|count|result|x)\]")
            .expect("static pattern")
    })
}

fn parse_step(raw: &str) -> Result<Step, String> {
    let trimmed = raw.trim();
    let unfenced = trimmed
        .strip_prefix("```json")
        .or_else(|| trimmed.strip_prefix("```"))
        .and_then(|s| s.strip_suffix("```"))
        .unwrap_or(trimmed)
        .trim();
    let value: Value = match serde_json::from_str(unfenced) {
        Ok(v) => v,
        Err(first) => match (unfenced.find('{'), unfenced.rfind('}')) {
            (Some(a), Some(b)) if a < b => {
                serde_json::from_str(&unfenced[a..=b]).map_err(|_| format!("not valid JSON: {first}"))?
            }
            _ => return Err(format!("not valid JSON: {first}")),
        },
    };
    let Value::Object(obj) = value else {
        return Err("expected a JSON object".into());
    };
    match (obj.get("tool"), obj.get("final")) {
        (Some(Value::String(name)), None) => {
            let args = obj.get("args").cloned().unwrap_or_else(|| json!({}));
            if !args.is_object() {
                return Err("\"args\" must be an object".into());
            }
            Ok(Step::Tool { name: name.clone(), args })
        }
        (None, Some(Value::String(text))) => {
            if placeholder().is_match(text) {
                return Err("the final answer contains an unresolved placeholder".into());
            }
            Ok(Step::Final(text.clone()))
        }
        _ => Err("expected either {\"tool\", \"args\"} or {\"final\"}".into()),
    }
}

/// Conversation so far, as the backend sees it.
pub fn backend_messages(session: &Session) -> Vec<ChatMessage> {
    let mut out = vec![ChatMessage::new(Role::System, system_prompt())];
    for e in session.transcript() {
        match e {
            TranscriptEntry::User { text } => out.push(ChatMessage::new(Role::User, text.clone())),
            TranscriptEntry::Assistant { text } => out.push(ChatMessage::new(Role::Assistant, text.clone())),
            TranscriptEntry::ToolResult { tool, ok, summary, data, .. } => {
                let body = json!({"tool": tool, "ok": ok, "summary": summary, "data": data});
                out.push(ChatMessage::new(Role::User, format!("{TOOL_RESULT_PREFIX}{body}")));
            }
            TranscriptEntry::Error { message } => out.push(ChatMessage::new(
                Role::User,
                format!("{REPAIR_PREFIX}{message}. Reply with exactly one JSON object."),
            )),
            TranscriptEntry::ToolCall { .. } | TranscriptEntry::Final { .. } => {}
        }
    }
    out
}

/// Runs one user turn: up to [`MAX_ROUNDS`] backend replies, each either a tool call
/// (validated, executed, result appended) or the final answer. A malformed reply gets
/// one repair prompt per turn.
pub async fn handle_chat(
    session: &mut Session,
    backend: &dyn ChatBackend,
    message: &str,
) -> Result<ChatReply, AgentError> {
    let start = session.transcript().len();
    session.push(TranscriptEntry::User { text: message.to_string() });
    let mut artifacts = Vec::new();
    let mut repaired = false;

    for _ in 0..MAX_ROUNDS {
        let raw = match backend.complete(&backend_messages(session)).await {
            Ok(r) => r,
            Err(e) => {
                session.push(TranscriptEntry::Error { message: e.to_string() });
                return Err(e);
            }
        };
        session.push(TranscriptEntry::Assistant { text: raw.clone() });
        let step = match parse_step(&raw) {
            Ok(s) => s,
            Err(problem) => {
                session.push(TranscriptEntry::Error { message: format!("malformed reply: {problem}") });
                if repaired {
                    return Err(AgentError::MalformedOutput(problem));
                }
                repaired = true;
                continue;
            }
        };
        match step {
            Step::Final(text) => {
                session.push(TranscriptEntry::Final { text: text.clone() });
                return Ok(ChatReply { reply: text, turn: session.transcript()[start..].to_vec(), artifacts });
            }
            Step::Tool { name, args } => {
                session.push(TranscriptEntry::ToolCall { tool: name.clone(), args: args.clone() });
                let entry = match execute_tool(session, &name, &args) {
                    Ok(out) => {
                        artifacts.extend(out.artifacts.iter().cloned());
                        TranscriptEntry::ToolResult {
                            tool: name,
                            ok: true,
                            summary: out.summary,
                            data: out.data,
                            artifacts: out.artifacts,
                        }
                    }
                    Err(e) => TranscriptEntry::ToolResult {
                        tool: name,
                        ok: false,
                        summary: e.to_string(),
                        data: Value::Null,
                        artifacts: vec![],
                    },
                };
                session.push(entry);
            }
        }
    }
    let err = AgentError::RoundLimit(MAX_ROUNDS);
    session.push(TranscriptEntry::Error { message: err.to_string() });
    Err(err)
}
