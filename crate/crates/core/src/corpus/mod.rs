//! Knowledge sources: loading documents and cutting them into chunks.

mod record;
mod splitter;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use record::{
    parse_manual_record, render_record, split_record_blocks, KnowledgeRecord, RecordError, CANONICAL_LABELS,
};
pub use splitter::{
    split_recursive, split_spans, Chunk, SplitterConfig, SplitterError, DEFAULT_CHUNK_SIZE, DEFAULT_OVERLAP,
    DEFAULT_SEPARATORS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocumentKind {
    Freeform,
    ManualRecord,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub kind: DocumentKind,
}

/// On-disk layout of a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusKind {
    /// A `.txt` file or a directory tree of them; one document per file.
    Text,
    /// A manual database file of `---`-separated disease records.
    ManualDatabase,
    /// Line-delimited JSON objects with `id` and `text`.
    Jsonl,
}

impl std::str::FromStr for CorpusKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" | "book" | "freeform" => Ok(Self::Text),
            "manual" | "database" | "records" => Ok(Self::ManualDatabase),
            "jsonl" => Ok(Self::Jsonl),
            other => Err(format!("unknown corpus kind `{other}`")),
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("path not found: {0}")]
    PathNotFound(PathBuf),
    #[error("cannot read {path}: {reason}")]
    UnreadableEntry { path: PathBuf, reason: String },
    #[error("duplicate document id `{0}`")]
    DuplicateId(String),
    #[error("{path}: record {index}: {source}")]
    Record {
        path: PathBuf,
        index: usize,
        source: RecordError,
    },
    #[error("{path}:{line}: {reason}")]
    BadLine { path: PathBuf, line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Skip unreadable files instead of failing.
    pub lenient: bool,
}

#[derive(Debug, Default)]
pub struct Corpus {
    pub documents: Vec<Document>,
    /// Entries skipped in lenient mode, with the reason.
    pub skipped: Vec<(PathBuf, String)>,
}

#[derive(Deserialize)]
struct JsonlDoc {
    id: String,
    text: String,
}

pub fn load_corpus(path: &Path, kind: CorpusKind, opts: LoadOptions) -> Result<Corpus, CorpusError> {
    if !path.exists() {
        return Err(CorpusError::PathNotFound(path.to_path_buf()));
    }
    let mut corpus = Corpus::default();
    match kind {
        CorpusKind::Text => load_text(path, opts, &mut corpus)?,
        CorpusKind::ManualDatabase => {
            let text = read_utf8(path)?;
            for (index, block) in split_record_blocks(&text).iter().enumerate() {
                let rec = parse_manual_record(block).map_err(|source| CorpusError::Record {
                    path: path.to_path_buf(),
                    index,
                    source,
                })?;
                corpus.documents.push(Document {
                    id: rec.disease.clone(),
                    text: render_record(&rec),
                    kind: DocumentKind::ManualRecord,
                });
            }
        }
        CorpusKind::Jsonl => {
            let text = read_utf8(path)?;
            for (i, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let doc: JsonlDoc = serde_json::from_str(line).map_err(|e| CorpusError::BadLine {
                    path: path.to_path_buf(),
                    line: i + 1,
                    reason: e.to_string(),
                })?;
                if doc.id.is_empty() {
                    return Err(CorpusError::BadLine {
                        path: path.to_path_buf(),
                        line: i + 1,
                        reason: "empty id".into(),
                    });
                }
                corpus.documents.push(Document {
                    id: doc.id,
                    text: doc.text,
                    kind: DocumentKind::Freeform,
                });
            }
        }
    }

    corpus.documents.sort_by(|a, b| a.id.cmp(&b.id));
    let mut seen = BTreeSet::new();
    for doc in &corpus.documents {
        if !seen.insert(doc.id.as_str()) {
            return Err(CorpusError::DuplicateId(doc.id.clone()));
        }
    }
    Ok(corpus)
}

fn read_utf8(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|e| CorpusError::UnreadableEntry {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn load_text(root: &Path, opts: LoadOptions, corpus: &mut Corpus) -> Result<(), CorpusError> {
    let mut files = Vec::new();
    if root.is_file() {
        files.push(root.to_path_buf());
    } else {
        collect_txt(root, &mut files)?;
    }
    for file in files {
        let id = if root.is_file() {
            file.file_name().unwrap_or_default().to_string_lossy().into_owned()
        } else {
            relative_id(root, &file)
        };
        match read_utf8(&file) {
            Ok(text) => corpus.documents.push(Document {
                id,
                text,
                kind: DocumentKind::Freeform,
            }),
            Err(CorpusError::UnreadableEntry { path, reason }) if opts.lenient => {
                corpus.skipped.push((path, reason));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(())
}

fn collect_txt(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), CorpusError> {
    let entries = fs::read_dir(dir).map_err(|e| CorpusError::UnreadableEntry {
        path: dir.to_path_buf(),
        reason: e.to_string(),
    })?;
    for entry in entries {
        let path = entry
            .map_err(|e| CorpusError::UnreadableEntry {
                path: dir.to_path_buf(),
                reason: e.to_string(),
            })?
            .path();
        if path.is_dir() {
            collect_txt(&path, out)?;
        } else if path.extension().is_some_and(|ext| ext == "txt") {
            out.push(path);
        }
    }
    Ok(())
}

fn relative_id(root: &Path, file: &Path) -> String {
    let rel = file.strip_prefix(root).unwrap_or(file);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// Splits every document. Manual records that fit in one chunk stay whole.
pub fn chunk_corpus(docs: &[Document], cfg: &SplitterConfig) -> Vec<Chunk> {
    docs.iter()
        .flat_map(|doc| split_recursive(&doc.id, &doc.text, cfg))
        .collect()
}
