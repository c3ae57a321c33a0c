//! The answering pipeline: condense the question against the conversation,
//! optionally retrieve reference chunks, build the prompt and complete it.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use eyeqa_core::evalkit::{CitedChunk, Persona};
use eyeqa_core::index::EmbeddingVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{BackendConfig, ChatRequest, Gateway, GatewayError, Message};
use crate::registry::{Registry, RegistryError, RetrievalSource, VariantSpec};
use crate::retrieval::{RetrievalError, Retrieved, Retriever};

pub const ROLE_PLAY_PATIENT: &str =
    "Suppose you are an ophthalmologist, you need to answer the patient's question with care.";
pub const ROLE_PLAY_STUDENT: &str =
    "Suppose you are an ophthalmologist, you need to answer the student's question with patience.";
pub const CONTEXT_HEADER: &str = "Reference material:";

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("unknown variant `{0}`")]
    UnknownVariant(String),
    #[error("unknown backend `{0}`")]
    UnknownBackend(String),
    #[error("variant `{variant}` retrieves from {index} but no such index is loaded")]
    MissingIndex { variant: String, index: RetrievalSource },
    #[error("question is empty")]
    EmptyQuestion,
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}

pub fn role_play_sentence(persona: Persona) -> &'static str {
    match persona {
        Persona::Patient => ROLE_PLAY_PATIENT,
        Persona::MedicalStudent => ROLE_PLAY_STUDENT,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub question: String,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub variant: String,
    pub persona: Persona,
    pub history: Vec<Turn>,
    pub created_at: DateTime<Utc>,
}

/// One exported line per turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub session_id: String,
    pub variant: String,
    pub persona: Persona,
    pub turn: usize,
    pub question: String,
    pub answer: String,
}

impl Session {
    pub fn export_jsonl(&self) -> String {
        let mut out = String::new();
        for (i, t) in self.history.iter().enumerate() {
            let rec = TurnRecord {
                session_id: self.id.clone(),
                variant: self.variant.clone(),
                persona: self.persona,
                turn: i + 1,
                question: t.question.clone(),
                answer: t.answer.clone(),
            };
            out.push_str(&serde_json::to_string(&rec).expect("turn serializes"));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub text: String,
    /// Ranked; empty when the variant does not retrieve.
    pub cited_chunks: Vec<Retrieved>,
    /// The prompt exactly as sent, message contents separated by blank lines.
    pub prompt_transcript: String,
    pub condensed_question: String,
}

impl Answer {
    pub fn citations(&self) -> Vec<CitedChunk> {
        self.cited_chunks
            .iter()
            .map(|c| CitedChunk {
                chunk_id: c.chunk_id.clone(),
                score: c.score,
            })
            .collect()
    }
}

/// Builds the completion request for one question.
///
/// Role-play and reference material go in the system message; the user
/// message is always the question alone. Without either there is no system
/// message at all.
pub fn build_prompt(role_play: bool, persona: Persona, question: &str, retrieved: &[Retrieved]) -> ChatRequest {
    let mut system = Vec::new();
    if role_play {
        system.push(role_play_sentence(persona).to_string());
    }
    if !retrieved.is_empty() {
        let chunks: Vec<&str> = retrieved.iter().map(|r| r.text.as_str()).collect();
        system.push(format!("{CONTEXT_HEADER}\n{}", chunks.join("\n\n")));
    }
    let mut messages = Vec::with_capacity(2);
    if !system.is_empty() {
        messages.push(Message::system(system.join("\n\n")));
    }
    messages.push(Message::user(question));
    ChatRequest::new(messages)
}

pub fn render_history(history: &[Turn]) -> String {
    history
        .iter()
        .map(|t| format!("User: {}\nAssistant: {}", t.question, t.answer))
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Clone, Default)]
pub struct EngineOptions {
    /// Directory for per-backend call transcripts.
    pub transcript_dir: Option<PathBuf>,
    /// Fail when a configured index file is absent instead of skipping it.
    pub require_indexes: bool,
}

pub struct Engine {
    registry: Registry,
    gateways: BTreeMap<String, Arc<Gateway>>,
    retrievers: BTreeMap<RetrievalSource, Arc<Retriever>>,
    session_seq: AtomicU64,
    session_salt: u64,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("variants", &self.registry.variant_names())
            .field("backends", &self.gateways.keys().collect::<Vec<_>>())
            .field("indexes", &self.retrievers.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl Engine {
    /// Assembles an engine from prebuilt parts. Every backend the registry
    /// names must be present in `gateways`.
    pub fn new(
        registry: Registry,
        gateways: BTreeMap<String, Arc<Gateway>>,
        retrievers: BTreeMap<RetrievalSource, Arc<Retriever>>,
    ) -> Result<Self, ChainError> {
        registry.validate()?;
        for v in &registry.variants {
            if !gateways.contains_key(&v.backend) {
                return Err(ChainError::UnknownBackend(v.backend.clone()));
            }
        }
        let salt = Utc::now().timestamp_nanos_opt().unwrap_or_default() as u64;
        Ok(Self {
            registry,
            gateways,
            retrievers,
            session_seq: AtomicU64::new(0),
            session_salt: salt,
        })
    }

    /// Builds gateways for every configured backend and loads the indexes.
    pub fn from_registry(registry: Registry, opts: &EngineOptions) -> Result<Self, ChainError> {
        let mut gateways = BTreeMap::new();
        for (name, cfg) in &registry.backends {
            let mut gw = Gateway::new(cfg.clone())?;
            if let Some(dir) = &opts.transcript_dir {
                gw = gw.with_transcript(dir.join(format!("{name}.transcript.jsonl")))?;
            }
            gateways.insert(name.clone(), Arc::new(gw));
        }
        let mut retrievers = BTreeMap::new();
        for (&source, path) in &registry.indexes {
            if !opts.require_indexes && !path.exists() {
                tracing::warn!(%source, path = %path.display(), "index file missing; variants using it will fail");
                continue;
            }
            retrievers.insert(source, Arc::new(Retriever::load(path)?));
        }
        Self::new(registry, gateways, retrievers)
    }

    /// The standard nine variants, every backend sharing one mock script.
    pub fn standard_mock(
        script: crate::gateway::MockScript,
        retrievers: BTreeMap<RetrievalSource, Arc<Retriever>>,
    ) -> Result<Self, ChainError> {
        let paths = retrievers
            .keys()
            .map(|s| (*s, PathBuf::from(format!("{s}.eyix"))))
            .collect();
        let mut registry = Registry::standard(paths);
        for cfg in registry.backends.values_mut() {
            *cfg = BackendConfig {
                model: cfg.model.clone(),
                ..BackendConfig::mock(script.clone())
            };
        }
        let mut gateways = BTreeMap::new();
        for (name, cfg) in &registry.backends {
            gateways.insert(name.clone(), Arc::new(Gateway::new(cfg.clone())?));
        }
        // standard() names both sources; drop variants whose index is absent
        registry
            .variants
            .retain(|v| v.retrieval == RetrievalSource::None || retrievers.contains_key(&v.retrieval));
        Self::new(registry, gateways, retrievers)
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn k(&self) -> usize {
        self.registry.chain.k
    }

    pub fn variant(&self, name: &str) -> Result<&VariantSpec, ChainError> {
        self.registry
            .variant(name)
            .ok_or_else(|| ChainError::UnknownVariant(name.to_string()))
    }

    pub fn gateway(&self, backend: &str) -> Result<&Arc<Gateway>, ChainError> {
        self.gateways
            .get(backend)
            .ok_or_else(|| ChainError::UnknownBackend(backend.to_string()))
    }

    pub fn embedder(&self) -> Result<&Arc<Gateway>, ChainError> {
        self.gateway(&self.registry.chain.embedder)
    }

    pub fn retriever(&self, source: RetrievalSource) -> Option<&Arc<Retriever>> {
        self.retrievers.get(&source)
    }

    pub fn retrievers(&self) -> impl Iterator<Item = (RetrievalSource, &Arc<Retriever>)> {
        self.retrievers.iter().map(|(s, r)| (*s, r))
    }

    pub fn new_session(&self, variant: &str, persona: Persona) -> Result<Session, ChainError> {
        let spec = self.variant(variant)?;
        let n = self.session_seq.fetch_add(1, Ordering::SeqCst) + 1;
        Ok(Session {
            id: format!("s{:08x}-{n}", self.session_salt & 0xffff_ffff),
            variant: spec.name.clone(),
            persona,
            history: Vec::new(),
            created_at: Utc::now(),
        })
    }

    /// Rewrites `question` as a standalone question. Empty history returns
    /// it unchanged without touching the backend.
    pub async fn condense_question(&self, session: &Session, question: &str) -> Result<String, ChainError> {
        let question = question.trim();
        if question.is_empty() {
            return Err(ChainError::EmptyQuestion);
        }
        if session.history.is_empty() {
            return Ok(question.to_string());
        }
        let spec = self.variant(&session.variant)?;
        let prompt = self
            .registry
            .chain
            .condense_prompt
            .replace("{history}", &render_history(&session.history))
            .replace("{question}", question);
        let reply = self
            .gateway(&spec.backend)?
            .chat(&ChatRequest::new(vec![Message::user(prompt)]))
            .await?;
        let condensed = reply.content.trim();
        Ok(if condensed.is_empty() { question } else { condensed }.to_string())
    }

    pub async fn embed_query(&self, text: &str) -> Result<EmbeddingVector, ChainError> {
        Ok(self.embedder()?.embed_one(text).await?)
    }

    /// Top-`k` chunks from `source` for `query`.
    pub async fn search(&self, source: RetrievalSource, query: &str, k: usize) -> Result<Vec<Retrieved>, ChainError> {
        let retriever = self.retrievers.get(&source).ok_or_else(|| ChainError::MissingIndex {
            variant: String::new(),
            index: source,
        })?;
        let q = self.embed_query(query).await?;
        Ok(retriever.search(&q, k)?)
    }

    /// Runs one turn. The session gains exactly one turn on success and is
    /// untouched on failure.
    pub async fn answer(&self, session: &mut Session, question: &str) -> Result<Answer, ChainError> {
        let spec = self.variant(&session.variant)?;
        let condensed = self.condense_question(session, question).await?;
        let cited = match spec.retrieval {
            RetrievalSource::None => Vec::new(),
            source => {
                let retriever = self.retrievers.get(&source).ok_or_else(|| ChainError::MissingIndex {
                    variant: spec.name.clone(),
                    index: source,
                })?;
                let q = self.embed_query(&condensed).await?;
                retriever.search(&q, self.k())?
            }
        };
        let request = build_prompt(spec.role_play, session.persona, &condensed, &cited);
        let reply = self.gateway(&spec.backend)?.chat(&request).await?;
        session.history.push(Turn {
            question: question.trim().to_string(),
            answer: reply.content.clone(),
        });
        Ok(Answer {
            text: reply.content,
            cited_chunks: cited,
            prompt_transcript: request.prompt_text(),
            condensed_question: condensed,
        })
    }
}
