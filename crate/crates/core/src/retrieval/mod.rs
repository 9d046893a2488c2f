//! Embedding and exact top-k cosine retrieval over the curated corpus.

pub mod embed;
pub mod index;
mod store;

use thiserror::Error;

pub use embed::{embed_text, EmbeddingVector, HashingEmbedder};
pub use index::{build_index, retrieve_topk, IndexEntry, RetrievalResult, TutorialIndex};
pub use store::Retriever;

use crate::gateway::GatewayError;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("text is empty after normalization")]
    EmptyText,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("index is empty")]
    EmptyIndex,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("duplicate tutorial id {0:?}")]
    DuplicateId(String),
    #[error("invalid embedding: {0}")]
    InvalidVector(String),
    #[error("document {0:?} has no title or text to embed")]
    NothingToEmbed(String),
    #[error("index file: {0}")]
    Format(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
