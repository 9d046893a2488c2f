use std::collections::HashMap;
use std::sync::Arc;

use super::{retrieve_topk, RetrievalError, RetrievalResult, TutorialIndex};
use crate::corpus::TutorialDoc;
use crate::gateway::EmbeddingClient;

/// An index together with its embedder and the documents it was built from.
#[derive(Clone)]
pub struct Retriever {
    pub index: Arc<TutorialIndex>,
    pub embedder: Arc<dyn EmbeddingClient>,
    docs: Arc<HashMap<String, TutorialDoc>>,
}

impl Retriever {
    /// Fails if the index references a document that is not in `docs`, or if
    /// the embedder is not the one the index was built with.
    pub fn new(
        index: TutorialIndex,
        embedder: Arc<dyn EmbeddingClient>,
        docs: impl IntoIterator<Item = TutorialDoc>,
    ) -> Result<Self, RetrievalError> {
        let docs: HashMap<String, TutorialDoc> = docs.into_iter().map(|d| (d.id.clone(), d)).collect();
        if let Some(missing) = index.entries().iter().find(|e| !docs.contains_key(&e.tutorial_id)) {
            return Err(RetrievalError::Format(format!("indexed tutorial {:?} missing from corpus", missing.tutorial_id)));
        }
        let tag = embedder.provider_tag();
        if tag != index.provider_tag() {
            return Err(RetrievalError::Format(format!(
                "index built with {:?} but embedder is {tag:?}",
                index.provider_tag()
            )));
        }
        Ok(Retriever { index: Arc::new(index), embedder, docs: Arc::new(docs) })
    }

    pub fn doc(&self, id: &str) -> Option<&TutorialDoc> {
        self.docs.get(id)
    }

    /// Top-k hits with their documents, in rank order.
    pub fn retrieve(&self, goal: &str, k: usize) -> Result<Vec<(RetrievalResult, &TutorialDoc)>, RetrievalError> {
        let hits = retrieve_topk(&self.index, goal, k, self.embedder.as_ref())?;
        Ok(hits
            .into_iter()
            .map(|h| {
                let doc = &self.docs[&h.tutorial_id];
                (h, doc)
            })
            .collect())
    }
}

impl std::fmt::Debug for Retriever {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Retriever").field("entries", &self.index.len()).field("docs", &self.docs.len()).finish()
    }
}
