//! Resumable batch answering over a question bank.
//!
//! Output is one JSON line per (question, variant): either an answer or an
//! error entry. A rerun skips every pair that already has an answer and
//! retries the ones that failed, so an interrupted run never repeats a
//! completed backend call.

use std::collections::{BTreeMap, HashSet};
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use eyeqa_core::evalkit::{AnswerRecord, EvalQuestion};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{ChainError, Engine};

#[derive(Debug, Error)]
pub enum BatchError {
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub question_id: String,
    pub variant: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BatchLine {
    Answer(AnswerRecord),
    Failure(FailureRecord),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct BatchSummary {
    pub answered: usize,
    pub skipped: usize,
    pub failed: usize,
}

/// Parses an answers file. Unparseable lines (a torn final write) are skipped.
pub fn read_batch_file(path: &Path) -> Result<Vec<BatchLine>, BatchError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(source) => {
            return Err(BatchError::Io {
                path: path.to_path_buf(),
                source,
            })
        }
    };
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(l) => out.push(l),
            Err(e) => tracing::warn!(line = i + 1, error = %e, "skipping unreadable batch line"),
        }
    }
    Ok(out)
}

/// The latest answer per (question, variant), in first-seen order.
pub fn read_answers(path: &Path) -> Result<Vec<AnswerRecord>, BatchError> {
    let mut order = Vec::new();
    let mut latest: BTreeMap<(String, String), AnswerRecord> = BTreeMap::new();
    for line in read_batch_file(path)? {
        if let BatchLine::Answer(a) = line {
            let key = (a.question_id.clone(), a.variant.clone());
            if !latest.contains_key(&key) {
                order.push(key.clone());
            }
            latest.insert(key, a);
        }
    }
    Ok(order.into_iter().filter_map(|k| latest.remove(&k)).collect())
}

/// Answers every question with every variant, appending to `out`.
///
/// Each pair runs on a fresh single-turn session using the question's
/// persona. Per-item failures are recorded and the run continues.
pub async fn collect_answers(
    engine: &Engine,
    variants: &[String],
    questions: &[EvalQuestion],
    out: &Path,
) -> Result<BatchSummary, BatchError> {
    let io = |source| BatchError::Io {
        path: out.to_path_buf(),
        source,
    };
    // resolve names up front so a typo fails before any backend call
    let names: Vec<String> = variants
        .iter()
        .map(|v| engine.variant(v).map(|s| s.name.clone()))
        .collect::<Result<_, _>>()?;

    let done: HashSet<(String, String)> = read_answers(out)?
        .into_iter()
        .map(|a| (a.question_id, a.variant))
        .collect();

    let needs_newline = std::fs::read(out)
        .map(|b| b.last().is_some_and(|&c| c != b'\n'))
        .unwrap_or(false);
    let mut file = OpenOptions::new().create(true).append(true).open(out).map_err(io)?;
    if needs_newline {
        file.write_all(b"\n").map_err(io)?;
    }

    let mut summary = BatchSummary::default();
    for variant in &names {
        for q in questions {
            if done.contains(&(q.id.clone(), variant.clone())) {
                summary.skipped += 1;
                continue;
            }
            let mut session = engine.new_session(variant, q.persona)?;
            let line = match engine.answer(&mut session, &q.text).await {
                Ok(a) => {
                    summary.answered += 1;
                    BatchLine::Answer(AnswerRecord {
                        question_id: q.id.clone(),
                        variant: variant.clone(),
                        question: q.text.clone(),
                        citations: a.citations(),
                        answer: a.text,
                    })
                }
                Err(e) => {
                    summary.failed += 1;
                    tracing::warn!(question = %q.id, %variant, error = %e, "answer failed");
                    BatchLine::Failure(FailureRecord {
                        question_id: q.id.clone(),
                        variant: variant.clone(),
                        error: e.to_string(),
                    })
                }
            };
            let mut text = serde_json::to_string(&line).expect("batch line serializes");
            text.push('\n');
            file.write_all(text.as_bytes()).map_err(io)?;
            file.sync_data().map_err(io)?;
        }
    }
    Ok(summary)
}
