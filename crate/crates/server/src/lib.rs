//! HTTP service and CLI plumbing around the engine and evaluation kit.
//!
//! [`api`] builds the axum router, [`cli`] implements the `eyeqa` binary's
//! subcommands, and [`config`] reads the shared TOML config file.

pub mod api;
pub mod cli;
pub mod config;
pub mod error;
pub mod eval;

pub use api::{router, AppState};
pub use config::{AppConfig, ServerSettings};
pub use error::ApiError;
