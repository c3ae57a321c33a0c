//! Chat-completion and embedding client.
//!
//! One [`Gateway`] wraps either a remote HTTP backend speaking the common
//! `/chat/completions` + `/embeddings` JSON protocol, or an in-process mock
//! that replays a [`MockScript`]. Both share the retry loop, per-attempt
//! timeout and optional JSONL transcript.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::future::Future;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Mutex, OnceLock};
use std::time::Duration;

use eyeqa_core::index::EmbeddingVector;
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

pub const DEFAULT_API_KEY_ENV: &str = "EYEQA_API_KEY";
pub const DEFAULT_EMBEDDING_DIM: usize = 384;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("backend returned {status}: {body}")]
    RemoteError { status: u16, body: String },
    #[error("backend rejected credentials ({status})")]
    AuthFailure { status: u16 },
    #[error("embedding width changed from {expected} to {actual}")]
    DimensionDrift { expected: usize, actual: usize },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid backend config: {0}")]
    InvalidConfig(String),
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("unexpected response: {0}")]
    Decode(String),
    #[error("transcript {path}: {source}")]
    Transcript {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Remote,
    #[default]
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub base_url: String,
    /// Inline key; prefer `api_key_env`.
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
    /// Environment variable holding the bearer token.
    pub api_key_env: String,
    pub model: String,
    /// Model name sent to `/embeddings`; falls back to `model`.
    pub embedding_model: Option<String>,
    /// Width of mock embeddings.
    pub embedding_dim: usize,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub backoff_initial_ms: u64,
    pub backoff_multiplier: f64,
    pub temperature: f64,
    pub max_tokens: Option<u32>,
    pub mock: MockScript,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Mock,
            base_url: String::new(),
            api_key: None,
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            model: "mock".into(),
            embedding_model: None,
            embedding_dim: DEFAULT_EMBEDDING_DIM,
            timeout_ms: 60_000,
            max_retries: 3,
            backoff_initial_ms: 500,
            backoff_multiplier: 2.0,
            temperature: 0.0,
            max_tokens: None,
            mock: MockScript::default(),
        }
    }
}

impl BackendConfig {
    pub fn mock(script: MockScript) -> Self {
        Self {
            mock: script,
            ..Self::default()
        }
    }

    pub fn remote(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            kind: BackendKind::Remote,
            base_url: base_url.into(),
            model: model.into(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        let bad = |m: &str| Err(GatewayError::InvalidConfig(m.into()));
        if self.timeout_ms == 0 {
            return bad("timeout must be positive");
        }
        if !(self.backoff_multiplier.is_finite() && self.backoff_multiplier >= 1.0) {
            return bad("backoff multiplier must be at least 1");
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return bad("temperature must lie in [0, 2]");
        }
        match self.kind {
            BackendKind::Remote if self.base_url.trim().is_empty() => bad("remote backend needs base_url"),
            BackendKind::Mock if self.embedding_dim == 0 => bad("mock embedding_dim must be positive"),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<Message>,
    /// Overrides the backend default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
}

impl ChatRequest {
    pub fn new(messages: Vec<Message>) -> Self {
        Self {
            messages,
            temperature: None,
            max_tokens: None,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        match self.messages.first() {
            None => Err(GatewayError::InvalidRequest("no messages".into())),
            Some(m) if m.role == Role::Assistant => Err(GatewayError::InvalidRequest(
                "first message must be system or user".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Message contents joined by blank lines; what mock rules match against
    /// and what an echo backend returns. A lone user message renders as itself.
    pub fn prompt_text(&self) -> String {
        self.messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n\n")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatReply {
    pub content: String,
    pub finish_reason: String,
    pub usage: Usage,
    /// Attempts spent, including the successful one.
    #[serde(default)]
    pub attempts: u32,
}

/// How a mock rule recognises a request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matcher {
    Contains(String),
    Regex(String),
    /// The whole prompt text, as produced by [`ChatRequest::prompt_text`].
    Exact(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockRule {
    #[serde(flatten)]
    pub matcher: Matcher,
    pub reply: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockReply {
    Fixed(String),
    /// Reply with the prompt text itself.
    Echo,
}

/// Injected misbehaviour for one attempt.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Fault {
    pub latency_ms: u64,
    pub status: Option<u16>,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockScript {
    /// Checked in order; the first match wins.
    pub rules: Vec<MockRule>,
    pub default: MockReply,
    /// Keyed by 1-based attempt ordinal across the gateway's lifetime.
    pub faults: BTreeMap<u64, Fault>,
}

impl Default for MockScript {
    fn default() -> Self {
        Self {
            rules: Vec::new(),
            default: MockReply::Fixed("ok".into()),
            faults: BTreeMap::new(),
        }
    }
}

impl MockScript {
    pub fn fixed(reply: impl Into<String>) -> Self {
        Self {
            default: MockReply::Fixed(reply.into()),
            ..Self::default()
        }
    }

    pub fn echo() -> Self {
        Self {
            default: MockReply::Echo,
            ..Self::default()
        }
    }

    pub fn rule(mut self, matcher: Matcher, reply: impl Into<String>) -> Self {
        self.rules.push(MockRule {
            matcher,
            reply: reply.into(),
        });
        self
    }

    pub fn fault(mut self, attempt: u64, fault: Fault) -> Self {
        self.faults.insert(attempt, fault);
        self
    }

    /// A script answering every recorded chat request with its recorded reply.
    pub fn replay(records: &[TranscriptRecord]) -> Self {
        let mut script = Self::echo();
        for r in records {
            if let (CallKind::Chat, Some(reply)) = (r.kind, &r.reply) {
                let Ok(req) = serde_json::from_value::<ChatRequest>(r.request.clone()) else {
                    continue;
                };
                if let Some(content) = reply.get("content").and_then(Value::as_str) {
                    script = script.rule(Matcher::Exact(req.prompt_text()), content);
                }
            }
        }
        script
    }
}

enum CompiledMatcher {
    Contains(String),
    Regex(Regex),
    Exact(String),
}

impl CompiledMatcher {
    fn matches(&self, prompt: &str) -> bool {
        match self {
            Self::Contains(s) => prompt.contains(s.as_str()),
            Self::Regex(r) => r.is_match(prompt),
            Self::Exact(s) => prompt == s,
        }
    }
}

struct MockBackend {
    rules: Vec<(CompiledMatcher, String)>,
    default: MockReply,
    faults: BTreeMap<u64, Fault>,
    dim: usize,
}

struct RemoteBackend {
    client: reqwest::Client,
    base_url: String,
    api_key: Option<String>,
}

enum Backend {
    Mock(MockBackend),
    Remote(RemoteBackend),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallKind {
    Chat,
    Embed,
}

/// One line of a gateway transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub call: u64,
    pub kind: CallKind,
    pub model: String,
    pub request: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reply: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub attempts: u32,
}

pub fn read_transcript(path: &Path) -> Result<Vec<TranscriptRecord>, GatewayError> {
    let io = |source| GatewayError::Transcript {
        path: path.to_path_buf(),
        source,
    };
    let text = std::fs::read_to_string(path).map_err(io)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| GatewayError::Decode(format!("transcript line: {e}"))))
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct GatewayStats {
    pub chat_calls: u64,
    pub embed_calls: u64,
    pub attempts: u64,
}

enum AttemptError {
    Timeout,
    Status { status: u16, body: String },
    Transport(String),
    Decode(String),
}

impl AttemptError {
    fn transient(&self) -> bool {
        match self {
            Self::Timeout | Self::Transport(_) => true,
            Self::Status { status, .. } => *status == 429 || *status >= 500,
            Self::Decode(_) => false,
        }
    }

    fn finish(self, attempts: u32) -> GatewayError {
        match self {
            Self::Timeout => GatewayError::Timeout { attempts },
            Self::Status {
                status: s @ (401 | 403),
                ..
            } => GatewayError::AuthFailure { status: s },
            Self::Status { status, body } => GatewayError::RemoteError { status, body },
            Self::Transport(message) => GatewayError::Transport { attempts, message },
            Self::Decode(m) => GatewayError::Decode(m),
        }
    }
}

pub struct Gateway {
    cfg: BackendConfig,
    backend: Backend,
    attempts: AtomicU64,
    chat_calls: AtomicU64,
    embed_calls: AtomicU64,
    calls: AtomicU64,
    embed_dim: OnceLock<usize>,
    transcript: Option<(PathBuf, Mutex<File>)>,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("kind", &self.cfg.kind)
            .field("model", &self.cfg.model)
            .field("stats", &self.stats())
            .finish()
    }
}

impl Gateway {
    pub fn new(cfg: BackendConfig) -> Result<Self, GatewayError> {
        cfg.validate()?;
        let backend = match cfg.kind {
            BackendKind::Mock => {
                let rules = cfg
                    .mock
                    .rules
                    .iter()
                    .map(|r| {
                        let m = match &r.matcher {
                            Matcher::Contains(s) => CompiledMatcher::Contains(s.clone()),
                            Matcher::Exact(s) => CompiledMatcher::Exact(s.clone()),
                            Matcher::Regex(p) => CompiledMatcher::Regex(
                                Regex::new(p).map_err(|e| GatewayError::InvalidConfig(format!("mock rule: {e}")))?,
                            ),
                        };
                        Ok((m, r.reply.clone()))
                    })
                    .collect::<Result<_, GatewayError>>()?;
                Backend::Mock(MockBackend {
                    rules,
                    default: cfg.mock.default.clone(),
                    faults: cfg.mock.faults.clone(),
                    dim: cfg.embedding_dim,
                })
            }
            BackendKind::Remote => {
                let api_key = cfg
                    .api_key
                    .clone()
                    .or_else(|| std::env::var(&cfg.api_key_env).ok())
                    .filter(|k| !k.is_empty());
                Backend::Remote(RemoteBackend {
                    client: reqwest::Client::new(),
                    base_url: cfg.base_url.trim_end_matches('/').to_string(),
                    api_key,
                })
            }
        };
        Ok(Self {
            cfg,
            backend,
            attempts: AtomicU64::new(0),
            chat_calls: AtomicU64::new(0),
            embed_calls: AtomicU64::new(0),
            calls: AtomicU64::new(0),
            embed_dim: OnceLock::new(),
            transcript: None,
        })
    }

    /// A mock gateway with default settings and the given script.
    pub fn mock(script: MockScript) -> Self {
        Self::new(BackendConfig::mock(script)).expect("default mock config is valid")
    }

    /// Appends one JSON line per call to `path`.
    pub fn with_transcript(mut self, path: impl Into<PathBuf>) -> Result<Self, GatewayError> {
        let path = path.into();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|source| GatewayError::Transcript {
                path: path.clone(),
                source,
            })?;
        self.transcript = Some((path, Mutex::new(file)));
        Ok(self)
    }

    pub fn config(&self) -> &BackendConfig {
        &self.cfg
    }

    pub fn stats(&self) -> GatewayStats {
        GatewayStats {
            chat_calls: self.chat_calls.load(Ordering::SeqCst),
            embed_calls: self.embed_calls.load(Ordering::SeqCst),
            attempts: self.attempts.load(Ordering::SeqCst),
        }
    }

    pub async fn chat(&self, req: &ChatRequest) -> Result<ChatReply, GatewayError> {
        req.validate()?;
        self.chat_calls.fetch_add(1, Ordering::SeqCst);
        let outcome = self.with_retries(|ordinal| self.chat_once(req, ordinal)).await;
        let outcome = outcome.map(|(mut reply, attempts)| {
            reply.attempts = attempts;
            reply
        });
        let request = serde_json::to_value(req).unwrap_or(Value::Null);
        let attempts = match &outcome {
            Ok(r) => r.attempts,
            Err(e) => attempts_of(e),
        };
        self.record(
            CallKind::Chat,
            request,
            outcome
                .as_ref()
                .ok()
                .map(|r| serde_json::to_value(r).unwrap_or(Value::Null)),
            outcome.as_ref().err(),
            attempts,
        )?;
        outcome
    }

    /// One vector per input, in order. An empty input makes no call.
    pub async fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, GatewayError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        self.embed_calls.fetch_add(1, Ordering::SeqCst);
        let outcome = self.with_retries(|ordinal| self.embed_once(texts, ordinal)).await;
        let outcome = outcome.and_then(|(vectors, attempts)| self.check_width(&vectors).map(|_| (vectors, attempts)));
        let attempts = match &outcome {
            Ok((_, a)) => *a,
            Err(e) => attempts_of(e),
        };
        let reply = outcome
            .as_ref()
            .ok()
            .map(|(v, _)| json!({ "count": v.len(), "dim": v.first().map_or(0, EmbeddingVector::dim) }));
        self.record(
            CallKind::Embed,
            json!({ "input": texts }),
            reply,
            outcome.as_ref().err(),
            attempts,
        )?;
        outcome.map(|(v, _)| v)
    }

    pub async fn embed_one(&self, text: &str) -> Result<EmbeddingVector, GatewayError> {
        let mut v = self.embed(&[text.to_string()]).await?;
        v.pop()
            .ok_or_else(|| GatewayError::Decode("no embedding returned".into()))
    }

    fn check_width(&self, vectors: &[EmbeddingVector]) -> Result<(), GatewayError> {
        let Some(first) = vectors.first() else {
            return Ok(());
        };
        let expected = *self.embed_dim.get_or_init(|| first.dim());
        match vectors.iter().find(|v| v.dim() != expected) {
            Some(v) => Err(GatewayError::DimensionDrift {
                expected,
                actual: v.dim(),
            }),
            None => Ok(()),
        }
    }

    async fn with_retries<'a, T, F, Fut>(&'a self, mut op: F) -> Result<(T, u32), GatewayError>
    where
        F: FnMut(u64) -> Fut,
        Fut: Future<Output = Result<T, AttemptError>> + 'a,
    {
        let timeout = Duration::from_millis(self.cfg.timeout_ms);
        let mut delay = self.cfg.backoff_initial_ms as f64;
        let mut attempt = 0u32;
        loop {
            attempt += 1;
            let ordinal = self.attempts.fetch_add(1, Ordering::SeqCst) + 1;
            let result = match tokio::time::timeout(timeout, op(ordinal)).await {
                Ok(r) => r,
                Err(_) => Err(AttemptError::Timeout),
            };
            match result {
                Ok(v) => return Ok((v, attempt)),
                Err(e) if !e.transient() || attempt > self.cfg.max_retries => return Err(e.finish(attempt)),
                Err(_) => {
                    tracing::debug!(attempt, delay_ms = delay, "retrying backend call");
                    tokio::time::sleep(Duration::from_millis(delay as u64)).await;
                    delay *= self.cfg.backoff_multiplier;
                }
            }
        }
    }

    async fn chat_once(&self, req: &ChatRequest, ordinal: u64) -> Result<ChatReply, AttemptError> {
        match &self.backend {
            Backend::Mock(m) => {
                m.inject(ordinal).await?;
                let prompt = req.prompt_text();
                let content = m
                    .rules
                    .iter()
                    .find(|(matcher, _)| matcher.matches(&prompt))
                    .map(|(_, reply)| reply.clone())
                    .unwrap_or_else(|| match &m.default {
                        MockReply::Fixed(s) => s.clone(),
                        MockReply::Echo => prompt.clone(),
                    });
                Ok(ChatReply {
                    usage: Usage {
                        prompt_tokens: word_count(&prompt),
                        completion_tokens: word_count(&content),
                    },
                    content,
                    finish_reason: "stop".into(),
                    attempts: 0,
                })
            }
            Backend::Remote(r) => {
                let mut body = json!({
                    "model": self.cfg.model,
                    "messages": req.messages,
                    "temperature": req.temperature.unwrap_or(self.cfg.temperature),
                });
                if let Some(n) = req.max_tokens.or(self.cfg.max_tokens) {
                    body["max_tokens"] = json!(n);
                }
                let v = r.post("/chat/completions", &body).await?;
                let choice = v
                    .pointer("/choices/0")
                    .ok_or_else(|| AttemptError::Decode("response has no choices".into()))?;
                let content = choice
                    .pointer("/message/content")
                    .and_then(Value::as_str)
                    .ok_or_else(|| AttemptError::Decode("choice has no message content".into()))?;
                let count = |key: &str| v.pointer(&format!("/usage/{key}")).and_then(Value::as_u64).unwrap_or(0);
                Ok(ChatReply {
                    content: content.to_string(),
                    finish_reason: choice
                        .get("finish_reason")
                        .and_then(Value::as_str)
                        .unwrap_or("unknown")
                        .to_string(),
                    usage: Usage {
                        prompt_tokens: count("prompt_tokens"),
                        completion_tokens: count("completion_tokens"),
                    },
                    attempts: 0,
                })
            }
        }
    }

    async fn embed_once(&self, texts: &[String], ordinal: u64) -> Result<Vec<EmbeddingVector>, AttemptError> {
        match &self.backend {
            Backend::Mock(m) => {
                m.inject(ordinal).await?;
                Ok(texts
                    .iter()
                    .map(|t| EmbeddingVector(hash_embedding(t, m.dim)))
                    .collect())
            }
            Backend::Remote(r) => {
                let model = self.cfg.embedding_model.as_deref().unwrap_or(&self.cfg.model);
                let v = r
                    .post("/embeddings", &json!({ "model": model, "input": texts }))
                    .await?;
                let data = v
                    .get("data")
                    .and_then(Value::as_array)
                    .ok_or_else(|| AttemptError::Decode("response has no data array".into()))?;
                if data.len() != texts.len() {
                    return Err(AttemptError::Decode(format!(
                        "{} embeddings for {} inputs",
                        data.len(),
                        texts.len()
                    )));
                }
                let mut rows: Vec<(u64, EmbeddingVector)> = Vec::with_capacity(data.len());
                for (i, item) in data.iter().enumerate() {
                    let index = item.get("index").and_then(Value::as_u64).unwrap_or(i as u64);
                    let values = item
                        .get("embedding")
                        .and_then(Value::as_array)
                        .ok_or_else(|| AttemptError::Decode("item has no embedding".into()))?
                        .iter()
                        .map(|x| x.as_f64().map(|f| f as f32))
                        .collect::<Option<Vec<f32>>>()
                        .ok_or_else(|| AttemptError::Decode("non-numeric embedding value".into()))?;
                    rows.push((index, EmbeddingVector(values)));
                }
                rows.sort_by_key(|(i, _)| *i);
                Ok(rows.into_iter().map(|(_, v)| v).collect())
            }
        }
    }

    fn record(
        &self,
        kind: CallKind,
        request: Value,
        reply: Option<Value>,
        error: Option<&GatewayError>,
        attempts: u32,
    ) -> Result<(), GatewayError> {
        let Some((path, file)) = &self.transcript else {
            return Ok(());
        };
        let rec = TranscriptRecord {
            call: self.calls.fetch_add(1, Ordering::SeqCst) + 1,
            kind,
            model: self.cfg.model.clone(),
            request,
            reply,
            error: error.map(ToString::to_string),
            attempts,
        };
        let mut line = serde_json::to_string(&rec).map_err(|e| GatewayError::Decode(e.to_string()))?;
        line.push('\n');
        let mut f = file.lock().unwrap_or_else(|p| p.into_inner());
        f.write_all(line.as_bytes()).map_err(|source| GatewayError::Transcript {
            path: path.clone(),
            source,
        })
    }
}

fn attempts_of(e: &GatewayError) -> u32 {
    match e {
        GatewayError::Timeout { attempts } | GatewayError::Transport { attempts, .. } => *attempts,
        _ => 1,
    }
}

fn word_count(s: &str) -> u64 {
    s.split_whitespace().count() as u64
}

impl MockBackend {
    async fn inject(&self, ordinal: u64) -> Result<(), AttemptError> {
        let Some(fault) = self.faults.get(&ordinal) else {
            return Ok(());
        };
        if fault.latency_ms > 0 {
            tokio::time::sleep(Duration::from_millis(fault.latency_ms)).await;
        }
        match fault.status {
            Some(status) => Err(AttemptError::Status {
                status,
                body: fault.body.clone(),
            }),
            None => Ok(()),
        }
    }
}

impl RemoteBackend {
    async fn post(&self, path: &str, body: &Value) -> Result<Value, AttemptError> {
        let mut req = self.client.post(format!("{}{path}", self.base_url)).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().await.map_err(|e| {
            if e.is_timeout() {
                AttemptError::Timeout
            } else {
                AttemptError::Transport(e.to_string())
            }
        })?;
        let status = resp.status();
        let text = resp.text().await.map_err(|e| AttemptError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(AttemptError::Status {
                status: status.as_u16(),
                body: text,
            });
        }
        serde_json::from_str(&text).map_err(|e| AttemptError::Decode(e.to_string()))
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Deterministic pseudo-embedding: lowercase word tokens (weight 1) and
/// character trigrams (weight 0.5) are FNV-1a hashed into `dim` signed
/// buckets, then the vector is scaled to unit length. Texts sharing words
/// land near each other, which is enough for retrieval tests.
pub fn hash_embedding(text: &str, dim: usize) -> Vec<f32> {
    let mut v = vec![0.0f64; dim];
    let mut add = |feature: &[u8], weight: f64| {
        let h = fnv1a(feature);
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        v[(h % dim as u64) as usize] += sign * weight;
    };
    let lower = text.to_lowercase();
    for word in lower.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()) {
        add(word.as_bytes(), 1.0);
    }
    let padded: Vec<char> = format!(" {lower} ").chars().collect();
    for w in padded.windows(3) {
        add(w.iter().collect::<String>().as_bytes(), 0.5);
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        // only reachable when dim buckets cancel exactly; keep the vector usable
        v[(fnv1a(lower.as_bytes()) % dim as u64) as usize] = 1.0;
        return v.into_iter().map(|x| x as f32).collect();
    }
    v.into_iter().map(|x| (x / norm) as f32).collect()
}
