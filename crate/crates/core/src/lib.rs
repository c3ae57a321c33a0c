//! Core building blocks for a retrieval-augmented ophthalmology QA engine and
//! its blind human-evaluation harness.
//!
//! Everything in this crate is synchronous and free of network access so it
//! can be shared by the service, the CLI and the browser demo.

pub mod corpus;
pub mod dataprep;
pub mod evalkit;
pub mod index;
pub mod report;
pub mod stats;

pub use corpus::{Chunk, Document, DocumentKind, KnowledgeRecord, SplitterConfig};
pub use index::{EmbeddingVector, SearchHit, VectorIndex};
