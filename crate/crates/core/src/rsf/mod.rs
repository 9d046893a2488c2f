//! Dataset factories for the guidance model: teacher-distilled SFT pairs and
//! rejection-sampled pairs kept only when the frozen agent reproduces the
//! gold action under them.

pub mod rejection;
pub mod sft;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use rejection::{
    build_rsf_dataset, export_rsf_dataset, replay_filter, resolve_all, resolve_conflicts, sample_candidates,
    DiscardCounts, DiscardReason, RsfParams, RsfRecord, RsfStats,
};
pub use sft::{build_sft_dataset, SftStats};
pub use crate::task::SeedExample;

use crate::gateway::ChatMessage;
use crate::retrieval::RetrievalError;

#[derive(Debug, Error)]
pub enum RsfError {
    #[error("{0}")]
    InvalidParams(String),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Training hyper-parameters carried as metadata for the external trainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingHints {
    pub stage: String,
    pub learning_rate: f64,
    pub scheduler: String,
    pub epochs: u32,
    /// Checkpoint the stage starts from.
    pub init_from: String,
}

impl TrainingHints {
    pub fn sft() -> Self {
        TrainingHints {
            stage: "sft".into(),
            learning_rate: 1e-5,
            scheduler: "cosine".into(),
            epochs: 1,
            init_from: "base".into(),
        }
    }

    pub fn rsf() -> Self {
        TrainingHints {
            stage: "rsf".into(),
            learning_rate: 5e-6,
            scheduler: "cosine".into(),
            epochs: 1,
            init_from: "sft".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowMeta {
    pub seed_id: String,
    pub tutorial_id: String,
    pub relevance: u8,
    pub prompt_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub teacher_tag: Option<String>,
    pub training: TrainingHints,
}

/// One `{prompt, completion, meta}` line of an exported dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRow {
    pub prompt: Vec<ChatMessage>,
    pub completion: String,
    pub meta: RowMeta,
}

/// Where `build_sft_dataset` writes quarantined pairs.
pub fn sft_quarantine_path(out: &std::path::Path) -> std::path::PathBuf {
    sidecar(out, "quarantine.jsonl")
}

/// Where `export_rsf_dataset` writes every record, retained or not.
pub fn rsf_records_path(out: &std::path::Path) -> std::path::PathBuf {
    sidecar(out, "records.jsonl")
}

/// `<out>.<suffix>` next to an output file.
pub(crate) fn sidecar(out: &std::path::Path, suffix: &str) -> std::path::PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(format!(".{suffix}"));
    s.into()
}
