//! Retrieval tools that differentiate debater agents: an in-process vector
//! index (RAG), a web-search client, and the null tool for Vanilla agents.

mod index;
mod search;

pub use index::{
    chunk_text, CorpusChunk, VectorIndex, DEFAULT_CHUNK_CHARS, DEFAULT_OVERLAP_CHARS,
    INDEX_FORMAT_VERSION,
};
pub use search::{
    fixture_file_name, FixtureSearchClient, HttpSearchClient, SearchClient, SearchError,
    SearchFixture, SearchResult, DEFAULT_SEARCH_ENDPOINT, ENV_SEARCH_API_KEY,
};

use std::sync::Arc;

use thiserror::Error;

use crate::backends::{Backend, BackendError};
use crate::domain::AgentKind;
use crate::domain::EvidenceDocument;

pub const DEFAULT_K: usize = 3;
pub const DEFAULT_MAX_DOC_CHARS: usize = 2000;

#[derive(Debug, Error)]
pub enum ToolError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("invalid index file: {0}")]
    InvalidIndex(String),
    #[error("io error: {0}")]
    Io(String),
}

/// A debater's evidence source.
#[derive(Clone)]
pub enum RetrievalTool {
    Rag { index: Arc<VectorIndex> },
    Search { client: Arc<dyn SearchClient> },
    Vanilla,
}

impl RetrievalTool {
    pub fn kind(&self) -> AgentKind {
        match self {
            RetrievalTool::Rag { .. } => AgentKind::Rag,
            RetrievalTool::Search { .. } => AgentKind::Search,
            RetrievalTool::Vanilla => AgentKind::Vanilla,
        }
    }

    /// Top-k evidence for `query`. RAG ranks the index by cosine; Search
    /// asks the client; Vanilla always returns nothing. Fewer than `k`
    /// documents is not an error. Document text is capped at
    /// `max_doc_chars` characters.
    pub fn retrieve(
        &self,
        query: &str,
        k: usize,
        max_doc_chars: usize,
        backend: &dyn Backend,
    ) -> Result<Vec<EvidenceDocument>, ToolError> {
        assert!(k >= 1, "retrieval depth k must be at least 1");
        assert!(!query.trim().is_empty(), "query must be non-empty");
        match self {
            RetrievalTool::Vanilla => Ok(Vec::new()),
            RetrievalTool::Rag { index } => {
                let query_embedding = backend
                    .embed(std::slice::from_ref(&query.to_string()))?
                    .into_iter()
                    .next()
                    .ok_or_else(|| {
                        BackendError::InvalidResponse("no embedding returned".into())
                    })?;
                Ok(index
                    .search(&query_embedding, k)
                    .into_iter()
                    .filter(|(chunk, _)| !chunk.text.is_empty())
                    .map(|(chunk, sim)| EvidenceDocument {
                        source_id: chunk.chunk_id.clone(),
                        text: cap_chars(&chunk.text, max_doc_chars),
                        score: Some(sim.max(0.0)),
                        tool: AgentKind::Rag,
                    })
                    .collect())
            }
            RetrievalTool::Search { client } => Ok(client
                .search(query, k)?
                .into_iter()
                .filter(|r| !r.content.is_empty())
                .map(|r| EvidenceDocument {
                    source_id: r.url,
                    text: cap_chars(&r.content, max_doc_chars),
                    score: r.score.map(|s| s.clamp(0.0, 1.0)),
                    tool: AgentKind::Search,
                })
                .collect()),
        }
    }
}

fn cap_chars(text: &str, max_chars: usize) -> String {
    if text.chars().count() <= max_chars {
        text.to_string()
    } else {
        text.chars().take(max_chars).collect()
    }
}
