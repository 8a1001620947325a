//! Corpus chunking and the exact (exhaustive) vector index.
//!
//! Exhaustive cosine scan instead of an approximate index: desk-scale
//! corpora make ANN unnecessary and exactness is testable against a
//! brute-force oracle. Ties in similarity break by ascending chunk id so
//! transcripts are reproducible.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::backends::{cosine, Backend, EmbeddingVector};
use crate::tools::ToolError;

pub const INDEX_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_CHUNK_CHARS: usize = 1000;
pub const DEFAULT_OVERLAP_CHARS: usize = 200;
/// Chunks embedded per backend call; embedding APIs cap batch sizes.
const EMBED_BATCH: usize = 256;

/// One embedded slice of a source document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusChunk {
    pub chunk_id: String,
    pub source_doc: String,
    pub text: String,
    pub embedding: EmbeddingVector,
}

/// Sliding-window chunking by character count. Returns `(char_offset, text)`
/// pairs; the window stops once it covers the end of the document, so no
/// chunk is fully contained in its predecessor.
pub fn chunk_text(text: &str, chunk_chars: usize, overlap_chars: usize) -> Vec<(usize, String)> {
    assert!(
        chunk_chars > overlap_chars,
        "chunk_chars must exceed overlap_chars"
    );
    let chars: Vec<char> = text.chars().collect();
    if chars.is_empty() {
        return Vec::new();
    }
    let step = chunk_chars - overlap_chars;
    let mut chunks = Vec::new();
    let mut start = 0usize;
    loop {
        let end = (start + chunk_chars).min(chars.len());
        chunks.push((start, chars[start..end].iter().collect()));
        if end >= chars.len() {
            break;
        }
        start += step;
    }
    chunks
}

/// Immutable embedded corpus searched by exhaustive cosine scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VectorIndex {
    pub version: u32,
    pub dim: usize,
    pub chunks: Vec<CorpusChunk>,
}

impl VectorIndex {
    /// Chunks and embeds `documents` (as `(doc_id, text)` pairs).
    pub fn ingest(
        documents: &[(String, String)],
        chunk_chars: usize,
        overlap_chars: usize,
        backend: &dyn Backend,
    ) -> Result<Self, ToolError> {
        if documents.is_empty() {
            return Err(ToolError::EmptyCorpus);
        }
        let mut ids = Vec::new();
        let mut sources = Vec::new();
        let mut texts = Vec::new();
        for (doc_id, text) in documents {
            for (offset, chunk) in chunk_text(text, chunk_chars, overlap_chars) {
                ids.push(format!("{doc_id}#{offset:08}"));
                sources.push(doc_id.clone());
                texts.push(chunk);
            }
        }
        if texts.is_empty() {
            return Err(ToolError::EmptyCorpus);
        }
        let mut embeddings = Vec::with_capacity(texts.len());
        for batch in texts.chunks(EMBED_BATCH) {
            embeddings.extend(backend.embed(batch)?);
        }
        let dim = embeddings.first().map(|e| e.dim()).unwrap_or(0);
        let chunks = ids
            .into_iter()
            .zip(sources)
            .zip(texts.into_iter().zip(embeddings))
            .map(|((chunk_id, source_doc), (text, embedding))| CorpusChunk {
                chunk_id,
                source_doc,
                text,
                embedding,
            })
            .collect();
        Ok(Self {
            version: INDEX_FORMAT_VERSION,
            dim,
            chunks,
        })
    }

    pub fn from_chunks(dim: usize, chunks: Vec<CorpusChunk>) -> Self {
        Self {
            version: INDEX_FORMAT_VERSION,
            dim,
            chunks,
        }
    }

    /// Top-k chunks by cosine similarity, non-increasing, ties broken by
    /// ascending chunk id. A zero query or chunk embedding scores 0.
    pub fn search(&self, query: &EmbeddingVector, k: usize) -> Vec<(&CorpusChunk, f64)> {
        let mut scored: Vec<(&CorpusChunk, f64)> = self
            .chunks
            .iter()
            .map(|chunk| {
                let sim = cosine(query, &chunk.embedding).unwrap_or(0.0);
                (chunk, sim)
            })
            .collect();
        scored.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.0.chunk_id.cmp(&b.0.chunk_id))
        });
        scored.truncate(k);
        scored
    }

    pub fn save(&self, path: &Path) -> Result<(), ToolError> {
        let file = std::fs::File::create(path)
            .map_err(|e| ToolError::Io(format!("cannot create {path:?}: {e}")))?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)
            .map_err(|e| ToolError::Io(format!("cannot write index: {e}")))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ToolError> {
        let data = std::fs::read_to_string(path)
            .map_err(|e| ToolError::Io(format!("cannot read {path:?}: {e}")))?;
        let index: Self = serde_json::from_str(&data)
            .map_err(|e| ToolError::InvalidIndex(format!("cannot parse index: {e}")))?;
        if index.version != INDEX_FORMAT_VERSION {
            return Err(ToolError::InvalidIndex(format!(
                "unsupported index version {} (expected {})",
                index.version, INDEX_FORMAT_VERSION
            )));
        }
        Ok(index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::ScriptedBackend;

    #[test]
    fn short_doc_yields_single_chunk() {
        let chunks = chunk_text("0123456789", 20, 0);
        assert_eq!(chunks, vec![(0, "0123456789".to_string())]);
    }

    #[test]
    fn window_starts_follow_step() {
        // 100 chars, chunk 50, overlap 10 -> starts at 0, 40, 80
        // (hand-enumerated: step = 40; 80 + 50 covers the end).
        let text = "a".repeat(100);
        let chunks = chunk_text(&text, 50, 10);
        let starts: Vec<usize> = chunks.iter().map(|(s, _)| *s).collect();
        assert_eq!(starts, vec![0, 40, 80]);
        assert_eq!(chunks[0].1.len(), 50);
        assert_eq!(chunks[2].1.len(), 20);
    }

    #[test]
    fn exact_cover_does_not_emit_contained_tail() {
        let text = "a".repeat(50);
        let chunks = chunk_text(&text, 50, 10);
        assert_eq!(chunks.len(), 1);
    }

    #[test]
    fn chunking_is_char_based_not_byte_based() {
        let text = "ééééé"; // 5 chars, 10 bytes
        let chunks = chunk_text(text, 3, 1);
        assert_eq!(chunks[0].1, "ééé");
        assert_eq!(chunks[1].1, "ééé");
    }

    #[test]
    fn ingest_rejects_empty_corpus() {
        let backend = ScriptedBackend::from_entries(vec![]);
        assert!(matches!(
            VectorIndex::ingest(&[], 100, 0, &backend),
            Err(ToolError::EmptyCorpus)
        ));
    }

    #[test]
    fn ingest_assigns_unique_sortable_chunk_ids() {
        let backend = ScriptedBackend::from_entries(vec![]);
        let text = "x".repeat(100);
        let docs = vec![("doc1".to_string(), text)];
        let index = VectorIndex::ingest(&docs, 50, 10, &backend).unwrap();
        let ids: Vec<&str> = index.chunks.iter().map(|c| c.chunk_id.as_str()).collect();
        assert_eq!(ids, vec!["doc1#00000000", "doc1#00000040", "doc1#00000080"]);
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(ids, sorted);
    }

    #[test]
    fn save_load_round_trip_preserves_index() {
        let backend = ScriptedBackend::from_entries(vec![]);
        let docs = vec![("d".to_string(), "some document text".to_string())];
        let index = VectorIndex::ingest(&docs, 100, 0, &backend).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("index.json");
        index.save(&path).unwrap();
        let loaded = VectorIndex::load(&path).unwrap();
        assert_eq!(loaded.chunks.len(), index.chunks.len());
        assert_eq!(loaded.dim, index.dim);
        assert_eq!(loaded.chunks[0].text, "some document text");
    }

    #[test]
    fn load_rejects_unknown_version() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("index.json");
        std::fs::write(&path, r#"{"version":99,"dim":2,"chunks":[]}"#).unwrap();
        assert!(matches!(
            VectorIndex::load(&path),
            Err(ToolError::InvalidIndex(_))
        ));
    }

    #[test]
    fn search_ranks_by_cosine_with_id_ties() {
        let chunk = |id: &str, values: &[f64]| CorpusChunk {
            chunk_id: id.to_string(),
            source_doc: "d".to_string(),
            text: format!("text {id}"),
            embedding: EmbeddingVector::new(values.to_vec()),
        };
        let index = VectorIndex::from_chunks(
            2,
            vec![
                chunk("b", &[1.0, 0.0]),
                chunk("a", &[1.0, 0.0]),
                chunk("c", &[0.0, 1.0]),
            ],
        );
        let hits = index.search(&EmbeddingVector::new(vec![1.0, 0.0]), 3);
        let ids: Vec<&str> = hits.iter().map(|(c, _)| c.chunk_id.as_str()).collect();
        assert_eq!(ids, vec!["a", "b", "c"]);
        assert_eq!(hits[0].1, 1.0);
    }
}
