//! A vector index paired with the chunk texts it points at.
//!
//! The index file only stores ids and offsets, so chunk texts travel in a
//! JSONL sidecar next to it: `book.eyix` is accompanied by
//! `book.chunks.jsonl`, one record per index entry in insertion order.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use eyeqa_core::index::{EmbeddingVector, IndexError, VectorIndex};
use eyeqa_core::Chunk;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{Gateway, GatewayError};

/// Texts embedded per backend call while building.
pub const EMBED_BATCH: usize = 64;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("no chunks to index")]
    Empty,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: {reason}")]
    BadSidecar { path: PathBuf, line: usize, reason: String },
    #[error("sidecar has no text for index entry `{0}`")]
    MissingChunkText(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkRecord {
    pub id: String,
    pub doc_id: String,
    pub start: usize,
    pub end: usize,
    pub text: String,
}

impl From<&Chunk> for ChunkRecord {
    fn from(c: &Chunk) -> Self {
        Self {
            id: c.id(),
            doc_id: c.doc_id.clone(),
            start: c.start,
            end: c.end,
            text: c.text.clone(),
        }
    }
}

/// One search result with its text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Retrieved {
    pub chunk_id: String,
    pub score: f64,
    pub rank: usize,
    pub text: String,
}

#[derive(Debug, Clone)]
pub struct Retriever {
    index: VectorIndex,
    records: Vec<ChunkRecord>,
    by_id: HashMap<String, usize>,
}

pub fn sidecar_path(index_path: &Path) -> PathBuf {
    index_path.with_extension("chunks.jsonl")
}

impl Retriever {
    pub fn new(index: VectorIndex, records: Vec<ChunkRecord>) -> Result<Self, RetrievalError> {
        let by_id: HashMap<String, usize> = records.iter().enumerate().map(|(i, r)| (r.id.clone(), i)).collect();
        if let Some(missing) = index.entries().iter().find(|e| !by_id.contains_key(&e.id)) {
            return Err(RetrievalError::MissingChunkText(missing.id.clone()));
        }
        Ok(Self { index, records, by_id })
    }

    /// Embeds every chunk through `embedder` and builds a flat index.
    pub async fn build(chunks: &[Chunk], embedder: &Gateway) -> Result<Self, RetrievalError> {
        if chunks.is_empty() {
            return Err(RetrievalError::Empty);
        }
        let mut vectors: Vec<EmbeddingVector> = Vec::with_capacity(chunks.len());
        for batch in chunks.chunks(EMBED_BATCH) {
            let texts: Vec<String> = batch.iter().map(|c| c.text.clone()).collect();
            vectors.extend(embedder.embed(&texts).await?);
        }
        let dim = vectors[0].dim();
        let index = VectorIndex::from_chunks(dim, chunks, &vectors)?;
        Self::new(index, chunks.iter().map(ChunkRecord::from).collect())
    }

    pub fn index(&self) -> &VectorIndex {
        &self.index
    }

    pub fn chunk(&self, id: &str) -> Option<&ChunkRecord> {
        self.by_id.get(id).map(|&i| &self.records[i])
    }

    pub fn search(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<Retrieved>, RetrievalError> {
        self.index
            .search(query.as_slice(), k)?
            .into_iter()
            .map(|h| {
                let text = self
                    .chunk(&h.chunk_id)
                    .map(|c| c.text.clone())
                    .ok_or_else(|| RetrievalError::MissingChunkText(h.chunk_id.clone()))?;
                Ok(Retrieved {
                    chunk_id: h.chunk_id,
                    score: h.score,
                    rank: h.rank,
                    text,
                })
            })
            .collect()
    }

    /// Writes the index to `path` and the chunk texts to its sidecar.
    pub fn save(&self, path: &Path) -> Result<(), RetrievalError> {
        self.index.save(path)?;
        let side = sidecar_path(path);
        let io = |source| RetrievalError::Io {
            path: side.clone(),
            source,
        };
        let mut w = BufWriter::new(File::create(&side).map_err(io)?);
        for entry in self.index.entries() {
            let rec = &self.records[self.by_id[&entry.id]];
            let line = serde_json::to_string(rec).expect("chunk record serializes");
            writeln!(w, "{line}").map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, RetrievalError> {
        let index = VectorIndex::load(path)?;
        let side = sidecar_path(path);
        let text = std::fs::read_to_string(&side).map_err(|source| RetrievalError::Io {
            path: side.clone(),
            source,
        })?;
        let records = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| RetrievalError::BadSidecar {
                    path: side.clone(),
                    line: i + 1,
                    reason: e.to_string(),
                })
            })
            .collect::<Result<Vec<ChunkRecord>, _>>()?;
        Self::new(index, records)
    }
}
