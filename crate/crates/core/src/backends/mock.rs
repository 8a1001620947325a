//! Deterministic scripted backend for offline runs and tests.
//!
//! Chat responses come from a script: the first entry whose tag matches and
//! whose `contains` matcher (if any) occurs in the prompt wins. An unmatched
//! prompt is a hard [`BackendError::ScriptMiss`] — a script hole is a test
//! bug, never silently defaulted. Embeddings come from an exact-text table,
//! falling back to a hash-derived unit vector.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Backend, BackendError, ChatRequest, EmbeddingVector, PromptTag};

pub const DEFAULT_EMBEDDING_DIM: usize = 8;

/// One scripted chat response.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub tag: PromptTag,
    /// Substring the prompt must contain; `None` matches any prompt with
    /// this tag.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contains: Option<String>,
    pub response: String,
}

/// On-disk script format for `--backend mock --script PATH`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Script {
    #[serde(default)]
    pub responses: Vec<ScriptEntry>,
    /// Exact text -> embedding values.
    #[serde(default)]
    pub embeddings: BTreeMap<String, Vec<f64>>,
    /// Dimension of hash-derived fallback vectors when the table is empty.
    #[serde(default)]
    pub embedding_dim: Option<usize>,
}

impl Script {
    pub fn from_json_file(path: &Path) -> Result<Self, BackendError> {
        let data = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Config(format!("cannot read script {path:?}: {e}")))?;
        serde_json::from_str(&data)
            .map_err(|e| BackendError::Config(format!("cannot parse script {path:?}: {e}")))
    }
}

/// Fully deterministic mock backend; no network access.
pub struct ScriptedBackend {
    entries: Vec<ScriptEntry>,
    embeddings: BTreeMap<String, EmbeddingVector>,
    dim: usize,
}

impl ScriptedBackend {
    pub fn new(script: Script) -> Result<Self, BackendError> {
        let mut embeddings = BTreeMap::new();
        let mut dim = None;
        for (text, values) in script.embeddings {
            let d = values.len();
            match dim {
                None => dim = Some(d),
                Some(existing) if existing != d => {
                    return Err(BackendError::Config(format!(
                        "embedding table mixes dimensions {existing} and {d}"
                    )))
                }
                _ => {}
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(BackendError::Config(format!(
                    "embedding for {text:?} has non-finite entries"
                )));
            }
            embeddings.insert(text, EmbeddingVector::new(values));
        }
        let dim = dim
            .or(script.embedding_dim)
            .unwrap_or(DEFAULT_EMBEDDING_DIM);
        if dim == 0 {
            return Err(BackendError::Config("embedding dim must be positive".into()));
        }
        Ok(Self {
            entries: script.responses,
            embeddings,
            dim,
        })
    }

    pub fn from_json_file(path: &Path) -> Result<Self, BackendError> {
        Self::new(Script::from_json_file(path)?)
    }

    /// Convenience builder for tests: entries only, hash embeddings.
    pub fn from_entries(entries: Vec<ScriptEntry>) -> Self {
        Self {
            entries,
            embeddings: BTreeMap::new(),
            dim: DEFAULT_EMBEDDING_DIM,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Deterministic unit vector with strictly positive components, derived from
/// the SHA-256 of the text. Positive components keep pairwise cosines in
/// [0, 1], matching what real text-embedding models produce.
pub fn hash_unit_vector(text: &str, dim: usize) -> EmbeddingVector {
    assert!(dim > 0, "embedding dim must be positive");
    let mut bytes = Vec::with_capacity(dim);
    let mut counter: u32 = 0;
    while bytes.len() < dim {
        let mut hasher = Sha256::new();
        hasher.update(counter.to_le_bytes());
        hasher.update(text.as_bytes());
        bytes.extend_from_slice(&hasher.finalize());
        counter += 1;
    }
    let mut values: Vec<f64> = bytes[..dim]
        .iter()
        .map(|&b| (b as f64 + 1.0) / 256.0)
        .collect();
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in &mut values {
        *v /= norm;
    }
    EmbeddingVector::new(values)
}

impl Backend for ScriptedBackend {
    fn chat(&self, req: &ChatRequest) -> Result<String, BackendError> {
        let prompt = req.prompt_text();
        for entry in &self.entries {
            if entry.tag != req.tag {
                continue;
            }
            match &entry.contains {
                Some(needle) if !prompt.contains(needle.as_str()) => continue,
                _ => return Ok(entry.response.clone()),
            }
        }
        let prompt_excerpt: String = prompt.chars().take(120).collect();
        Err(BackendError::ScriptMiss {
            tag: req.tag.as_str().to_string(),
            prompt_excerpt,
        })
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, BackendError> {
        Ok(texts
            .iter()
            .map(|text| {
                self.embeddings
                    .get(text)
                    .cloned()
                    .unwrap_or_else(|| hash_unit_vector(text, self.dim))
            })
            .collect())
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}
