//! Model access behind one narrow interface: multi-turn conversations,
//! token/cost accounting, transcript recording, and a replay backend that
//! serves recorded transcripts for deterministic offline runs.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

/// Token usage attached to an assistant turn. `estimated` is set when the
/// backend reported no counts and byte-length estimation was used instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnUsage {
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub estimated: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Turn {
    pub role: Role,
    pub text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub usage: Option<TurnUsage>,
    #[serde(default)]
    pub duration_ms: u64,
}

/// One multi-turn exchange about one pointer. Turns alternate user/assistant
/// starting with user; the same conversation carries lifting, refactoring,
/// and repair rounds so the model keeps its earlier analysis in context.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Conversation {
    pub key: String,
    pub model_id: String,
    pub temperature: f64,
    pub turns: Vec<Turn>,
}

impl Conversation {
    pub fn new(key: impl Into<String>, model_id: impl Into<String>, temperature: f64) -> Self {
        Conversation {
            key: key.into(),
            model_id: model_id.into(),
            temperature,
            turns: Vec::new(),
        }
    }

    pub fn assistant_turns(&self) -> usize {
        self.turns.iter().filter(|t| t.role == Role::Assistant).count()
    }
}

/// Accumulated usage over any number of exchanges.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageRecord {
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub rounds: u64,
}

impl UsageRecord {
    fn add(&mut self, usage: TurnUsage) {
        self.input_tokens += usage.input_tokens;
        self.output_tokens += usage.output_tokens;
        self.rounds += 1;
    }
}

/// Per-million-token prices in USD.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceSheet {
    pub input_rate: f64,
    pub output_rate: f64,
}

impl Default for PriceSheet {
    fn default() -> Self {
        // gpt-4o-mini list prices per million tokens
        PriceSheet {
            input_rate: 0.150,
            output_rate: 0.600,
        }
    }
}

/// Dollar cost of `usage` at `prices`. Callers format to three decimals when
/// reporting.
pub fn cost(usage: &UsageRecord, prices: &PriceSheet) -> f64 {
    usage.input_tokens as f64 * prices.input_rate / 1_000_000.0
        + usage.output_tokens as f64 * prices.output_rate / 1_000_000.0
}

/// Which pipeline phase issued a submission, for phase-split accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Rewrite,
    CompileFix,
    TestFix,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct UsageLedger {
    pub total: UsageRecord,
    pub rewrite: UsageRecord,
    pub compile_fix: UsageRecord,
    pub test_fix: UsageRecord,
    /// True when any turn's token counts were estimated rather than reported.
    pub estimated: bool,
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("API key environment variable {0} is not set")]
    MissingApiKey(String),
    #[error("transport failure after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("API returned status {status}: {body}")]
    Api { status: u16, body: String },
    #[error("malformed API reply: {0}")]
    MalformedReply(String),
    #[error("replay script for {key} has no reply for turn {turn}")]
    ReplayMiss { key: String, turn: usize },
    #[error("failed to load replay script {path}: {message}")]
    ScriptLoad { path: PathBuf, message: String },
    #[error("failed to record transcript {path}: {source}")]
    Record {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// One assistant reply as produced by a backend.
#[derive(Debug, Clone)]
pub struct Reply {
    pub text: String,
    pub input_tokens: Option<u64>,
    pub output_tokens: Option<u64>,
    pub duration_ms: u64,
}

pub trait Backend: Send {
    fn complete(&mut self, conversation: &Conversation) -> Result<Reply, GatewayError>;
    fn name(&self) -> &'static str;
}

/// Time source for phase timers. Replay runs use a virtual clock that
/// advances only by scripted durations, which pins every timing field of the
/// report to reproducible values.
#[derive(Debug)]
pub enum Clock {
    Monotonic(Instant),
    Virtual(AtomicU64),
}

impl Clock {
    pub fn monotonic() -> Self {
        Clock::Monotonic(Instant::now())
    }

    pub fn virtual_clock() -> Self {
        Clock::Virtual(AtomicU64::new(0))
    }

    /// Seconds since the clock's origin.
    pub fn now_s(&self) -> f64 {
        match self {
            Clock::Monotonic(start) => start.elapsed().as_secs_f64(),
            Clock::Virtual(us) => us.load(Ordering::SeqCst) as f64 / 1_000_000.0,
        }
    }

    /// Advance a virtual clock; no-op on a monotonic one (real time passes on
    /// its own there).
    pub fn advance_ms(&self, ms: u64) {
        if let Clock::Virtual(us) = self {
            us.fetch_add(ms * 1000, Ordering::SeqCst);
        }
    }

    pub fn is_virtual(&self) -> bool {
        matches!(self, Clock::Virtual(_))
    }
}

/// ceil(bytes / 4) — the fallback token estimate when the backend reports no
/// usage numbers.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.len() as u64).div_ceil(4)
}

/// The pipeline's single entry point to the model.
pub struct Gateway {
    backend: Box<dyn Backend>,
    pub ledger: UsageLedger,
    record_dir: Option<PathBuf>,
}

impl Gateway {
    pub fn new(backend: Box<dyn Backend>, record_dir: Option<PathBuf>) -> Self {
        Gateway {
            backend,
            ledger: UsageLedger::default(),
            record_dir,
        }
    }

    pub fn backend_name(&self) -> &'static str {
        self.backend.name()
    }

    /// Append `user_text` to the conversation, obtain the assistant reply,
    /// account usage under `phase`, advance `clock` by the reply's duration,
    /// and return the reply text. On error the conversation is left as it was
    /// before the call.
    pub fn submit(
        &mut self,
        conversation: &mut Conversation,
        user_text: impl Into<String>,
        phase: Phase,
        clock: &Clock,
    ) -> Result<String, GatewayError> {
        conversation.turns.push(Turn {
            role: Role::User,
            text: user_text.into(),
            usage: None,
            duration_ms: 0,
        });
        let reply = match self.backend.complete(conversation) {
            Ok(r) => r,
            Err(e) => {
                conversation.turns.pop();
                return Err(e);
            }
        };

        let prompt_bytes: String = conversation.turns.iter().map(|t| t.text.as_str()).collect();
        let estimated = reply.input_tokens.is_none() || reply.output_tokens.is_none();
        let usage = TurnUsage {
            input_tokens: reply.input_tokens.unwrap_or_else(|| estimate_tokens(&prompt_bytes)),
            output_tokens: reply.output_tokens.unwrap_or_else(|| estimate_tokens(&reply.text)),
            estimated,
        };
        clock.advance_ms(reply.duration_ms);
        conversation.turns.push(Turn {
            role: Role::Assistant,
            text: reply.text.clone(),
            usage: Some(usage),
            duration_ms: reply.duration_ms,
        });

        self.ledger.total.add(usage);
        match phase {
            Phase::Rewrite => self.ledger.rewrite.add(usage),
            Phase::CompileFix => self.ledger.compile_fix.add(usage),
            Phase::TestFix => self.ledger.test_fix.add(usage),
        }
        self.ledger.estimated |= estimated;

        if let Some(dir) = &self.record_dir {
            record_transcript(conversation, dir)?;
        }
        Ok(reply.text)
    }
}

/// Write a conversation as a JSONL transcript (one turn per line) under
/// `dir`, named by the conversation key. Rewritten in full on every call so a
/// crash mid-run still leaves every completed exchange on disk.
pub fn record_transcript(conversation: &Conversation, dir: &Path) -> Result<PathBuf, GatewayError> {
    let path = dir.join(format!("{}.jsonl", conversation.key));
    let write = || -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut out = String::new();
        for turn in &conversation.turns {
            let mut obj = serde_json::Map::new();
            obj.insert(
                "role".into(),
                serde_json::json!(match turn.role {
                    Role::User => "user",
                    Role::Assistant => "assistant",
                }),
            );
            obj.insert("text".into(), serde_json::json!(turn.text));
            if let Some(u) = turn.usage {
                obj.insert("input_tokens".into(), serde_json::json!(u.input_tokens));
                obj.insert("output_tokens".into(), serde_json::json!(u.output_tokens));
                obj.insert("estimated".into(), serde_json::json!(u.estimated));
            }
            if turn.duration_ms != 0 {
                obj.insert("duration_ms".into(), serde_json::json!(turn.duration_ms));
            }
            out.push_str(&serde_json::Value::Object(obj).to_string());
            out.push('\n');
        }
        std::fs::write(&path, out)
    };
    write().map_err(|source| GatewayError::Record {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

// ---------------------------------------------------------------------------
// Live backend: OpenAI-style chat-completions over HTTP.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct LiveConfig {
    pub base_url: String,
    pub api_key: String,
    pub request_timeout: Duration,
    pub retries: u32,
    pub retry_backoff_ms: u64,
}

pub struct LiveBackend {
    config: LiveConfig,
    client: reqwest::blocking::Client,
}

impl LiveBackend {
    pub fn new(config: LiveConfig) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.request_timeout)
            .build()
            .map_err(|e| GatewayError::Transport {
                attempts: 0,
                message: e.to_string(),
            })?;
        Ok(LiveBackend { config, client })
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn request_once(&self, conversation: &Conversation) -> Result<Reply, RequestFailure> {
        let messages: Vec<serde_json::Value> = conversation
            .turns
            .iter()
            .map(|t| {
                serde_json::json!({
                    "role": match t.role { Role::User => "user", Role::Assistant => "assistant" },
                    "content": t.text,
                })
            })
            .collect();
        let payload = serde_json::json!({
            "model": conversation.model_id,
            "temperature": conversation.temperature,
            "messages": messages,
        });

        let started = Instant::now();
        let resp = self
            .client
            .post(self.endpoint())
            .bearer_auth(&self.config.api_key)
            .json(&payload)
            .send()
            .map_err(|e| RequestFailure::Retryable(e.to_string()))?;

        let status = resp.status();
        let body = resp.text().map_err(|e| RequestFailure::Retryable(e.to_string()))?;
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(RequestFailure::Retryable(format!("status {status}: {body}")));
        }
        if !status.is_success() {
            return Err(RequestFailure::Fatal(GatewayError::Api {
                status: status.as_u16(),
                body,
            }));
        }

        let value: serde_json::Value = serde_json::from_str(&body)
            .map_err(|e| RequestFailure::Fatal(GatewayError::MalformedReply(e.to_string())))?;
        let text = value["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| {
                RequestFailure::Fatal(GatewayError::MalformedReply(
                    "missing choices[0].message.content".to_string(),
                ))
            })?
            .to_string();
        Ok(Reply {
            text,
            input_tokens: value["usage"]["prompt_tokens"].as_u64(),
            output_tokens: value["usage"]["completion_tokens"].as_u64(),
            duration_ms: started.elapsed().as_millis() as u64,
        })
    }
}

enum RequestFailure {
    Retryable(String),
    Fatal(GatewayError),
}

impl Backend for LiveBackend {
    fn complete(&mut self, conversation: &Conversation) -> Result<Reply, GatewayError> {
        let attempts = self.config.retries.max(1);
        let mut last = String::new();
        for attempt in 0..attempts {
            match self.request_once(conversation) {
                Ok(reply) => return Ok(reply),
                Err(RequestFailure::Fatal(e)) => return Err(e),
                Err(RequestFailure::Retryable(msg)) => {
                    last = msg;
                    if attempt + 1 < attempts {
                        let backoff = self.config.retry_backoff_ms << attempt;
                        std::thread::sleep(Duration::from_millis(backoff));
                    }
                }
            }
        }
        Err(GatewayError::Transport {
            attempts,
            message: last,
        })
    }

    fn name(&self) -> &'static str {
        "live"
    }
}

// ---------------------------------------------------------------------------
// Replay backend: serve assistant turns from recorded transcripts.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct ScriptReply {
    text: String,
    input_tokens: Option<u64>,
    output_tokens: Option<u64>,
    duration_ms: u64,
}

/// Serves the `n`-th scripted assistant reply to the `n`-th submission of
/// each conversation, keyed by conversation key (the script file stem).
#[derive(Debug)]
pub struct ReplayBackend {
    scripts: HashMap<String, Vec<ScriptReply>>,
}

impl ReplayBackend {
    pub fn load(dir: &Path) -> Result<Self, GatewayError> {
        let mut scripts = HashMap::new();
        let entries = std::fs::read_dir(dir).map_err(|e| GatewayError::ScriptLoad {
            path: dir.to_path_buf(),
            message: e.to_string(),
        })?;
        for entry in entries {
            let entry = entry.map_err(|e| GatewayError::ScriptLoad {
                path: dir.to_path_buf(),
                message: e.to_string(),
            })?;
            let path = entry.path();
            if path.extension().is_none_or(|e| e != "jsonl") {
                continue;
            }
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let content = std::fs::read_to_string(&path).map_err(|e| GatewayError::ScriptLoad {
                path: path.clone(),
                message: e.to_string(),
            })?;
            let mut replies = Vec::new();
            for (lineno, line) in content.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let value: serde_json::Value =
                    serde_json::from_str(line).map_err(|e| GatewayError::ScriptLoad {
                        path: path.clone(),
                        message: format!("line {}: {}", lineno + 1, e),
                    })?;
                if value["role"].as_str() == Some("assistant") {
                    replies.push(ScriptReply {
                        text: value["text"].as_str().unwrap_or_default().to_string(),
                        input_tokens: value["input_tokens"].as_u64(),
                        output_tokens: value["output_tokens"].as_u64(),
                        duration_ms: value["duration_ms"].as_u64().unwrap_or(0),
                    });
                }
            }
            scripts.insert(stem, replies);
        }
        Ok(ReplayBackend { scripts })
    }

    #[cfg(test)]
    pub(crate) fn from_replies(key: &str, texts: &[&str]) -> Self {
        let mut scripts = HashMap::new();
        scripts.insert(
            key.to_string(),
            texts
                .iter()
                .map(|t| ScriptReply {
                    text: t.to_string(),
                    input_tokens: None,
                    output_tokens: None,
                    duration_ms: 0,
                })
                .collect(),
        );
        ReplayBackend { scripts }
    }
}

impl Backend for ReplayBackend {
    fn complete(&mut self, conversation: &Conversation) -> Result<Reply, GatewayError> {
        let served = conversation.assistant_turns();
        let reply = self
            .scripts
            .get(&conversation.key)
            .and_then(|s| s.get(served));
        match reply {
            Some(r) => Ok(Reply {
                text: r.text.clone(),
                input_tokens: r.input_tokens,
                output_tokens: r.output_tokens,
                duration_ms: r.duration_ms,
            }),
            // turns is user,assistant,...,user here; its length is the
            // 1-based index of the user turn that ran past the script
            None => Err(GatewayError::ReplayMiss {
                key: conversation.key.clone(),
                turn: conversation.turns.len(),
            }),
        }
    }

    fn name(&self) -> &'static str {
        "replay"
    }
}
