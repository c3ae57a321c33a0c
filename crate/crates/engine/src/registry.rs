//! Variant registry: which backend, prompt style and retrieval source each
//! named pipeline variant uses. Loaded from one TOML file.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::BackendConfig;

pub const DEFAULT_K: usize = 4;
pub const BEST_FINETUNE: &str = "Best-finetune";
pub const BEST_FINETUNE_TARGET: &str = "Finetune3";

/// Condensation prompt. `{history}` and `{question}` are substituted.
pub const DEFAULT_CONDENSE_PROMPT: &str = "Rewrite the follow-up question so that it can be understood without the \
conversation above it. Keep the medical meaning unchanged and reply with the rewritten question only.\n\n\
Conversation:\n{history}\n\nFollow-up question: {question}\nStandalone question:";

/// The nine variants compared in the evaluation, in report order.
pub const STANDARD_VARIANTS: [&str; 9] = [
    "Original",
    "Role-play",
    "Finetune1",
    "Finetune2",
    "Finetune3",
    "Role-play+database",
    "Role-play+book",
    "Best-finetune+database",
    "Best-finetune+book",
];

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid registry: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrievalSource {
    #[default]
    None,
    Book,
    Database,
}

impl RetrievalSource {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Book => "book",
            Self::Database => "database",
        }
    }
}

impl fmt::Display for RetrievalSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RetrievalSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(Self::None),
            "book" | "textbook" => Ok(Self::Book),
            "database" | "manual" => Ok(Self::Database),
            other => Err(format!("unknown retrieval source `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantSpec {
    pub name: String,
    #[serde(default)]
    pub role_play: bool,
    #[serde(default)]
    pub retrieval: RetrievalSource,
    /// Key into the registry's backends.
    pub backend: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainSettings {
    /// Chunks retrieved per question.
    pub k: usize,
    /// Backend used for all embeddings, index building included.
    pub embedder: String,
    pub condense_prompt: String,
}

impl Default for ChainSettings {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            embedder: "embedder".into(),
            condense_prompt: DEFAULT_CONDENSE_PROMPT.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Registry {
    #[serde(default)]
    pub chain: ChainSettings,
    #[serde(default)]
    pub backends: BTreeMap<String, BackendConfig>,
    /// Index file per retrieval source; relative paths resolve against the
    /// registry file's directory.
    #[serde(default)]
    pub indexes: BTreeMap<RetrievalSource, PathBuf>,
    #[serde(default)]
    pub variants: Vec<VariantSpec>,
}

impl Registry {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self, RegistryError> {
        let mut reg: Self = toml::from_str(text).map_err(|e| RegistryError::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        if let Some(base) = origin.parent() {
            for p in reg.indexes.values_mut() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        reg.resolve_aliases();
        reg.validate()?;
        Ok(reg)
    }

    pub fn load(path: &Path) -> Result<Self, RegistryError> {
        let text = std::fs::read_to_string(path).map_err(|source| RegistryError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("registry serializes")
    }

    /// The nine standard variants, all on mock backends. Finetune backends
    /// are named `finetune1`..`finetune3`; the untuned model is `base`.
    pub fn standard(indexes: BTreeMap<RetrievalSource, PathBuf>) -> Self {
        let mut backends = BTreeMap::new();
        for name in ["base", "finetune1", "finetune2", "finetune3", "embedder"] {
            let mut cfg = BackendConfig::default();
            cfg.model = name.into();
            backends.insert(name.to_string(), cfg);
        }
        let v = |name: &str, role_play, retrieval, backend: &str| VariantSpec {
            name: name.into(),
            role_play,
            retrieval,
            backend: backend.into(),
        };
        use RetrievalSource::*;
        let mut reg = Self {
            chain: ChainSettings::default(),
            backends,
            indexes,
            variants: vec![
                v("Original", false, None, "base"),
                v("Role-play", true, None, "base"),
                v("Finetune1", true, None, "finetune1"),
                v("Finetune2", true, None, "finetune2"),
                v("Finetune3", true, None, "finetune3"),
                v("Role-play+database", true, Database, "base"),
                v("Role-play+book", true, Book, "base"),
                v("Best-finetune+database", true, Database, "best-finetune"),
                v("Best-finetune+book", true, Book, "best-finetune"),
            ],
        };
        reg.resolve_aliases();
        reg
    }

    /// A variant whose backend is `best-finetune` runs on whatever backend
    /// the `Finetune3` variant uses.
    fn resolve_aliases(&mut self) {
        let target = self
            .variants
            .iter()
            .find(|v| v.name == BEST_FINETUNE_TARGET)
            .map(|v| v.backend.clone())
            .unwrap_or_else(|| BEST_FINETUNE_TARGET.to_ascii_lowercase());
        for v in &mut self.variants {
            if v.backend.eq_ignore_ascii_case(BEST_FINETUNE) {
                v.backend = target.clone();
            }
        }
    }

    pub fn validate(&self) -> Result<(), RegistryError> {
        let bad = |m: String| Err(RegistryError::Invalid(m));
        if self.chain.k == 0 {
            return bad("k must be at least 1".into());
        }
        for key in ["{history}", "{question}"] {
            if !self.chain.condense_prompt.contains(key) {
                return bad(format!("condense_prompt lacks the {key} placeholder"));
            }
        }
        for (name, b) in &self.backends {
            b.validate()
                .map_err(|e| RegistryError::Invalid(format!("backend `{name}`: {e}")))?;
        }
        let mut seen = BTreeSet::new();
        for v in &self.variants {
            if !seen.insert(v.name.as_str()) {
                return bad(format!("variant `{}` defined twice", v.name));
            }
            if !self.backends.contains_key(&v.backend) {
                return bad(format!("variant `{}` uses unknown backend `{}`", v.name, v.backend));
            }
            if v.name == "Original" && (v.role_play || v.retrieval != RetrievalSource::None) {
                return bad("Original must have no role-play and no retrieval".into());
            }
            let suffix = v.name.rsplit_once('+').map(|(_, s)| s.to_ascii_lowercase());
            if let Some(src) = suffix.as_deref().and_then(|s| s.parse::<RetrievalSource>().ok()) {
                if v.retrieval != src {
                    return bad(format!("variant `{}` must retrieve from {src}", v.name));
                }
            }
            if v.retrieval != RetrievalSource::None {
                if !self.indexes.contains_key(&v.retrieval) {
                    return bad(format!("variant `{}` needs a {} index", v.name, v.retrieval));
                }
                if !self.backends.contains_key(&self.chain.embedder) {
                    return bad(format!("embedder backend `{}` is not defined", self.chain.embedder));
                }
            }
        }
        Ok(())
    }

    /// Exact name match, then case-insensitive, then the Best-finetune alias.
    pub fn variant(&self, name: &str) -> Option<&VariantSpec> {
        let name = name.trim();
        let target = if name.eq_ignore_ascii_case(BEST_FINETUNE) {
            BEST_FINETUNE_TARGET
        } else {
            name
        };
        self.variants
            .iter()
            .find(|v| v.name == target)
            .or_else(|| self.variants.iter().find(|v| v.name.eq_ignore_ascii_case(target)))
    }

    pub fn variant_names(&self) -> Vec<&str> {
        self.variants.iter().map(|v| v.name.as_str()).collect()
    }
}
