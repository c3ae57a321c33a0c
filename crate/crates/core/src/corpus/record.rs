//! Structured disease records of the manual knowledge database.
//!
//! A record is a block of `Label: value` lines starting with a `Disease:`
//! line. Lines that do not start with a recognised label continue the
//! previous value. Blank lines are ignored.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Field labels in canonical rendering order.
pub const CANONICAL_LABELS: [&str; 11] = [
    "Epidemiology",
    "Risk factors",
    "Etiology",
    "Classification|type",
    "Characterized",
    "Pathology",
    "Disease complications",
    "Diagnosis|Symptoms",
    "Further examination",
    "General treatment",
    "Treatment|Surgical intervention",
];

const DISEASE_LABEL: &str = "Disease";
const MAX_EXTENSION_LABEL_LEN: usize = 48;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecordError {
    #[error("record has no `Disease:` line")]
    MissingDiseaseName,
    #[error("field `{0}` appears more than once")]
    DuplicateField(String),
    #[error("continuation text before any label: {0:?}")]
    OrphanLine(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeRecord {
    pub disease: String,
    /// Labelled values in insertion order.
    pub fields: Vec<(String, String)>,
}

impl KnowledgeRecord {
    pub fn new(disease: impl Into<String>) -> Self {
        Self {
            disease: disease.into(),
            fields: Vec::new(),
        }
    }

    pub fn with_field(mut self, label: impl Into<String>, value: impl Into<String>) -> Self {
        self.fields.push((label.into(), value.into()));
        self
    }

    pub fn get(&self, label: &str) -> Option<&str> {
        self.fields.iter().find(|(l, _)| l == label).map(|(_, v)| v.as_str())
    }

    /// Non-empty fields keyed by label; order-insensitive equality.
    pub fn field_map(&self) -> BTreeMap<&str, &str> {
        self.fields
            .iter()
            .filter(|(_, v)| !v.trim().is_empty())
            .map(|(l, v)| (l.as_str(), v.as_str()))
            .collect()
    }

    pub fn field_equal(&self, other: &Self) -> bool {
        self.disease == other.disease && self.field_map() == other.field_map()
    }
}

fn is_canonical(label: &str) -> bool {
    CANONICAL_LABELS.contains(&label)
}

/// Returns the label if `line` opens a new field.
fn label_of(line: &str) -> Option<(&str, &str)> {
    let (label, rest) = line.split_once(':')?;
    let label = label.trim();
    let known = label == DISEASE_LABEL || is_canonical(label);
    let extension = label.len() <= MAX_EXTENSION_LABEL_LEN
        && label.chars().next().is_some_and(|c| c.is_ascii_uppercase())
        && label
            .chars()
            .all(|c| c.is_alphanumeric() || matches!(c, ' ' | '|' | '-' | '/' | '(' | ')' | '\''));
    (known || extension).then(|| (label, rest.trim()))
}

pub fn parse_manual_record(block: &str) -> Result<KnowledgeRecord, RecordError> {
    let mut disease: Option<String> = None;
    let mut fields: Vec<(String, String)> = Vec::new();
    // true while the most recent label was `Disease`
    let mut in_disease = false;

    for line in block.lines().map(str::trim).filter(|l| !l.is_empty()) {
        match label_of(line) {
            Some((DISEASE_LABEL, value)) => {
                if disease.is_some() {
                    return Err(RecordError::DuplicateField(DISEASE_LABEL.into()));
                }
                disease = Some(value.to_string());
                in_disease = true;
            }
            Some((label, value)) => {
                if fields.iter().any(|(l, _)| l == label) {
                    return Err(RecordError::DuplicateField(label.into()));
                }
                fields.push((label.to_string(), value.to_string()));
                in_disease = false;
            }
            None => {
                let target = if in_disease {
                    disease.as_mut()
                } else {
                    fields.last_mut().map(|(_, v)| v)
                };
                let Some(value) = target else {
                    return Err(RecordError::OrphanLine(line.to_string()));
                };
                if !value.is_empty() {
                    value.push(' ');
                }
                value.push_str(line);
            }
        }
    }

    let disease = disease
        .map(|d| d.trim_end_matches('.').trim().to_string())
        .filter(|d| !d.is_empty())
        .ok_or(RecordError::MissingDiseaseName)?;
    fields.retain(|(_, v)| !v.is_empty());
    Ok(KnowledgeRecord { disease, fields })
}

/// Canonical flattening: the disease line, canonical labels in schema order,
/// then extension labels in insertion order. Empty values are omitted.
pub fn render_record(rec: &KnowledgeRecord) -> String {
    let mut lines = vec![format!("{DISEASE_LABEL}: {}.", rec.disease)];
    let present = |label: &str| rec.get(label).filter(|v| !v.trim().is_empty());
    for label in CANONICAL_LABELS {
        if let Some(value) = present(label) {
            lines.push(format!("{label}: {value}"));
        }
    }
    for (label, value) in &rec.fields {
        if !is_canonical(label) && !value.trim().is_empty() {
            lines.push(format!("{label}: {value}"));
        }
    }
    lines.join("\n")
}

/// Splits a manual database file into record blocks on `---` lines.
pub fn split_record_blocks(text: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut current = String::new();
    for line in text.lines() {
        if line.trim() == "---" {
            if !current.trim().is_empty() {
                blocks.push(std::mem::take(&mut current));
            }
            current.clear();
        } else {
            current.push_str(line);
            current.push('\n');
        }
    }
    if !current.trim().is_empty() {
        blocks.push(current);
    }
    blocks
}
