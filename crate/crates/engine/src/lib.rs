//! Runtime side of eyeqa: the model gateway, variant registry, retrieval
//! chain and batch answering. Pure computation lives in `eyeqa-core`.

pub mod batch;
pub mod chain;
pub mod gateway;
pub mod registry;
pub mod retrieval;

pub use chain::{build_prompt, Answer, ChainError, Engine, EngineOptions, Session};
pub use gateway::{BackendConfig, ChatReply, ChatRequest, Gateway, GatewayError, Message, MockScript};
pub use registry::{Registry, RetrievalSource, VariantSpec};
pub use retrieval::{Retrieved, Retriever};
