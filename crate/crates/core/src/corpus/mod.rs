//! Tutorial corpus curation: ingest, n-gram classifier filter, dedup, LLM labeling.

pub mod classifier;
pub mod dedup;
pub mod doc;
pub mod ingest;
pub mod label;
pub mod pipeline;

use thiserror::Error;

pub use classifier::{classify_doc, train_classifier, Classification, NgramClassifier, TrainParams};
pub use dedup::{dedup_corpus, DedupConfig, DedupSignature};
pub use doc::{Block, LlmLabel, Source, TutorialDoc};
pub use ingest::{ingest_corpus, IngestMode, Ingested, LineError};
pub use label::{label_doc_llm, LabelFlag, LabelOutcome};
pub use pipeline::{run_corpus_pipeline, CorpusReport, CorpusRun, PipelineSpec};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}:{}: {}", .error.line, .error.message)]
    Line { path: String, error: LineError },
    #[error("training set has no {0} examples")]
    EmptyClass(&'static str),
    #[error("non-finite training loss in epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("invalid classifier parameters: {0}")]
    InvalidParams(String),
    #[error("classifier file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
