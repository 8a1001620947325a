//! Text-generation and text-embedding backends.
//!
//! Two implementations share one trait: an OpenAI-compatible networked
//! client ([`openai::OpenAiCompatBackend`]) and a deterministic scripted
//! mock ([`mock::ScriptedBackend`]) so the full protocol runs offline.

mod mock;
mod openai;

pub use mock::{Script, ScriptEntry, ScriptedBackend};
pub use openai::{OpenAiCompatBackend, OpenAiConfig};

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("backend unavailable after {attempts} attempt(s): {message}")]
    Unavailable { attempts: u32, message: String },
    #[error("scripted backend has no entry for tag {tag} matching prompt: {prompt_excerpt:?}")]
    ScriptMiss { tag: String, prompt_excerpt: String },
    #[error("backend returned an invalid response: {0}")]
    InvalidResponse(String),
    #[error("backend configuration error: {0}")]
    Config(String),
}

/// Purpose of a prompt; routes mock scripts and attributes cost per phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptTag {
    QueryFormulation,
    Respond,
    Decompose,
    Verify,
    GenQuestions,
    Judge,
}

impl PromptTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            PromptTag::QueryFormulation => "query-formulation",
            PromptTag::Respond => "respond",
            PromptTag::Decompose => "decompose",
            PromptTag::Verify => "verify",
            PromptTag::GenQuestions => "gen-questions",
            PromptTag::Judge => "judge",
        }
    }
}

impl fmt::Display for PromptTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
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
    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

/// One chat call. `agent` and `round` are logging context, stamped by the
/// engine so call logs can attribute cost per debater and round.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub tag: PromptTag,
    pub agent: Option<String>,
    pub round: Option<u32>,
}

impl ChatRequest {
    pub fn new(tag: PromptTag, messages: Vec<Message>) -> Self {
        assert!(!messages.is_empty(), "chat request needs at least one message");
        Self {
            messages,
            temperature: 0.0,
            max_tokens: 1024,
            tag,
            agent: None,
            round: None,
        }
    }

    /// All message contents joined, as seen by script matchers.
    pub fn prompt_text(&self) -> String {
        self.messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// A fixed-length real vector produced by an embedding backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Error)]
#[error("cosine of a zero vector is undefined")]
pub struct ZeroVector;

/// Standard cosine similarity. Dimensions must match (programming error
/// otherwise); an all-zero input is a degenerate-embedding signal the
/// caller maps to similarity 0.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, ZeroVector> {
    assert_eq!(a.dim(), b.dim(), "cosine requires equal dimensions");
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.values.iter().zip(&b.values) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(ZeroVector);
    }
    Ok(dot / (na.sqrt() * nb.sqrt()))
}

/// Uniform interface over text generation and embedding.
pub trait Backend: Send + Sync {
    fn chat(&self, req: &ChatRequest) -> Result<String, BackendError>;

    /// One vector per input, order-preserving.
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, BackendError>;

    /// True when identical inputs always yield identical outputs (mock).
    fn is_deterministic(&self) -> bool {
        false
    }
}

pub type BackendHandle = Arc<dyn Backend>;

/// One record in the newline-delimited JSON call log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CallRecord {
    pub tag: String,
    pub round: Option<u32>,
    pub agent: Option<String>,
    pub latency_ms: u64,
    pub prompt_chars: usize,
    pub completion_chars: usize,
}

/// Thread-safe accumulator of backend call records.
#[derive(Debug, Default)]
pub struct CallLog {
    records: Mutex<Vec<CallRecord>>,
}

impl CallLog {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    pub fn append(&self, record: CallRecord) {
        self.records.lock().unwrap().push(record);
    }

    pub fn snapshot(&self) -> Vec<CallRecord> {
        self.records.lock().unwrap().clone()
    }

    pub fn count_tag(&self, tag: &str) -> usize {
        self.records
            .lock()
            .unwrap()
            .iter()
            .filter(|r| r.tag == tag)
            .count()
    }

    pub fn chat_calls(&self) -> usize {
        self.records
            .lock()
            .unwrap()
            .iter()
            .filter(|r| r.tag != "embed")
            .count()
    }

    pub fn embed_calls(&self) -> usize {
        self.count_tag("embed")
    }

    pub fn write_jsonl(&self, mut w: impl Write) -> std::io::Result<()> {
        for record in self.records.lock().unwrap().iter() {
            serde_json::to_writer(&mut w, record)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn write_jsonl_file(&self, path: &Path) -> std::io::Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_jsonl(std::io::BufWriter::new(file))
    }
}

/// Decorator recording every call into a [`CallLog`].
pub struct LoggedBackend {
    inner: BackendHandle,
    log: Arc<CallLog>,
}

impl LoggedBackend {
    pub fn new(inner: BackendHandle, log: Arc<CallLog>) -> Self {
        Self { inner, log }
    }
}

impl Backend for LoggedBackend {
    fn chat(&self, req: &ChatRequest) -> Result<String, BackendError> {
        let start = Instant::now();
        let result = self.inner.chat(req);
        let completion_chars = result.as_ref().map(|s| s.chars().count()).unwrap_or(0);
        self.log.append(CallRecord {
            tag: req.tag.as_str().to_string(),
            round: req.round,
            agent: req.agent.clone(),
            latency_ms: start.elapsed().as_millis() as u64,
            prompt_chars: req.prompt_text().chars().count(),
            completion_chars,
        });
        result
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, BackendError> {
        let start = Instant::now();
        let result = self.inner.embed(texts);
        self.log.append(CallRecord {
            tag: "embed".to_string(),
            round: None,
            agent: None,
            latency_ms: start.elapsed().as_millis() as u64,
            prompt_chars: texts.iter().map(|t| t.chars().count()).sum(),
            completion_chars: 0,
        });
        result
    }

    fn is_deterministic(&self) -> bool {
        self.inner.is_deterministic()
    }
}

/// Decorator stamping agent/round context onto requests that lack it, so
/// scoring helpers keep their plain signatures while logs stay attributable.
pub struct MetaBackend {
    inner: BackendHandle,
    agent: String,
    round: u32,
}

impl MetaBackend {
    pub fn new(inner: BackendHandle, agent: impl Into<String>, round: u32) -> Self {
        Self {
            inner,
            agent: agent.into(),
            round,
        }
    }
}

impl Backend for MetaBackend {
    fn chat(&self, req: &ChatRequest) -> Result<String, BackendError> {
        let mut req = req.clone();
        req.agent.get_or_insert_with(|| self.agent.clone());
        req.round.get_or_insert(self.round);
        self.inner.chat(&req)
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, BackendError> {
        self.inner.embed(texts)
    }

    fn is_deterministic(&self) -> bool {
        self.inner.is_deterministic()
    }
}
