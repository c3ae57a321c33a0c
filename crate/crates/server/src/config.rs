//! The config file: the variant registry plus an optional `[server]` table.
//!
//! ```toml
//! [server]
//! bind = "0.0.0.0:8080"
//! eval_root = "runs"
//! rater_tokens = { "tok-1" = "rater1" }
//! ```
//!
//! Relative paths resolve against the file's directory. Secrets stay out of
//! the file: backend keys come from each backend's `api_key_env`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use eyeqa_engine::registry::RegistryError;
use eyeqa_engine::{Registry, RetrievalSource};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Path of the config file when `--config` is not given.
pub const CONFIG_ENV: &str = "EYEQA_CONFIG";
/// Overrides `server.bind`.
pub const BIND_ENV: &str = "EYEQA_BIND";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error(transparent)]
    Registry(#[from] RegistryError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerSettings {
    pub bind: String,
    /// Directory holding one subdirectory per evaluation run.
    pub eval_root: PathBuf,
    /// Built web UI assets, served under `/ui`.
    pub ui_dir: PathBuf,
    /// Where backend call transcripts go; none are written when unset.
    pub transcript_dir: Option<PathBuf>,
    /// Bearer token to rater id. Empty means rater endpoints are open.
    pub rater_tokens: BTreeMap<String, String>,
    /// Guards run creation and reports when set.
    pub admin_token: Option<String>,
}

impl Default for ServerSettings {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".into(),
            eval_root: "runs".into(),
            ui_dir: "webui/dist".into(),
            transcript_dir: None,
            rater_tokens: BTreeMap::new(),
            admin_token: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AppConfig {
    pub registry: Registry,
    pub server: ServerSettings,
}

impl AppConfig {
    /// Standard variants on mock backends, indexes expected under `indexes/`.
    pub fn default_mock() -> Self {
        let indexes = [
            (RetrievalSource::Book, PathBuf::from("indexes/book.eyix")),
            (RetrievalSource::Database, PathBuf::from("indexes/database.eyix")),
        ];
        Self {
            registry: Registry::standard(indexes.into()),
            server: ServerSettings::default(),
        }
    }

    pub fn from_toml(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        let parse_err = |reason: String| ConfigError::Parse {
            path: origin.to_path_buf(),
            reason,
        };
        let mut table: toml::Table = toml::from_str(text).map_err(|e| parse_err(e.to_string()))?;
        let mut server = match table.remove("server") {
            Some(v) => v
                .try_into::<ServerSettings>()
                .map_err(|e| parse_err(format!("[server]: {e}")))?,
            None => ServerSettings::default(),
        };
        let rest = toml::to_string(&table).map_err(|e| parse_err(e.to_string()))?;
        let registry = Registry::from_toml(&rest, origin)?;
        if let Some(base) = origin.parent() {
            let anchor = |p: &mut PathBuf| {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            };
            anchor(&mut server.eval_root);
            anchor(&mut server.ui_dir);
            if let Some(t) = server.transcript_dir.as_mut() {
                anchor(t);
            }
        }
        Ok(Self { registry, server })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, path)
    }

    /// Loads `path` when given, else falls back to the mock defaults, then
    /// applies environment overrides.
    pub fn resolve(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => Self::load(p)?,
            None => Self::default_mock(),
        };
        if let Ok(bind) = std::env::var(BIND_ENV) {
            cfg.server.bind = bind;
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn server_table_is_split_off() {
        let text = r#"
[server]
eval_root = "evals"
rater_tokens = { "t1" = "r1" }

[backends.embedder]
kind = "mock"
[backends.base]
kind = "mock"

[[variants]]
name = "Original"
backend = "base"
"#;
        let cfg = AppConfig::from_toml(text, Path::new("/etc/eyeqa/eyeqa.toml")).unwrap();
        assert_eq!(cfg.server.eval_root, PathBuf::from("/etc/eyeqa/evals"));
        assert_eq!(cfg.server.rater_tokens["t1"], "r1");
        assert_eq!(cfg.server.bind, "127.0.0.1:8080");
        assert_eq!(cfg.registry.variant_names(), vec!["Original"]);
    }

    #[test]
    fn unknown_server_key_is_rejected() {
        let text = "[server]\nbnd = \"x\"\n[backends.embedder]\nkind = \"mock\"\n";
        let err = AppConfig::from_toml(text, Path::new("c.toml")).unwrap_err();
        assert!(err.to_string().contains("bnd"), "{err}");
    }

    #[test]
    fn defaults_validate() {
        AppConfig::default_mock().registry.validate().unwrap();
    }

    #[test]
    fn shipped_sample_matches_standard_registry() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config/eyeqa.toml");
        let cfg = AppConfig::load(&path).unwrap();
        let base = path.parent().unwrap();
        let indexes = [
            (RetrievalSource::Book, base.join("../indexes/book.eyix")),
            (RetrievalSource::Database, base.join("../indexes/database.eyix")),
        ]
        .into_iter()
        .collect();
        assert_eq!(cfg.registry, Registry::standard(indexes));
        assert_eq!(cfg.server.eval_root, base.join("runs"));
    }
}
