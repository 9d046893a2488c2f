use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::RetrievalError;
use crate::gateway::{EmbeddingClient, GatewayError};
use crate::text::{hash_str, tokens};

pub const DEFAULT_DIMS: usize = 256;
const BUCKET_SEED: u64 = 0x7475_746f_7272_6167;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector {
    values: Vec<f32>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f32>) -> Result<Self, RetrievalError> {
        if values.is_empty() {
            return Err(RetrievalError::InvalidVector("zero dimensions".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(RetrievalError::InvalidVector(format!("non-finite value at {i}")));
        }
        Ok(EmbeddingVector { values })
    }

    pub fn dims(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt()
    }

    /// Cosine similarity; zero-norm vectors score 0.
    pub fn cosine(&self, other: &EmbeddingVector) -> f64 {
        let dot: f64 = self.values.iter().zip(&other.values).map(|(&a, &b)| a as f64 * b as f64).sum();
        let denom = self.norm() * other.norm();
        if denom == 0.0 {
            0.0
        } else {
            dot / denom
        }
    }
}

/// Offline embedder: word unigrams hashed into `dims` count buckets, then L2-normalized.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dims: usize,
}

impl HashingEmbedder {
    pub fn new(dims: usize) -> Self {
        assert!(dims > 0, "embedding dims must be positive");
        HashingEmbedder { dims }
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn embed_one(&self, text: &str) -> Option<EmbeddingVector> {
        let toks = tokens(text);
        if toks.is_empty() {
            return None;
        }
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for t in &toks {
            *counts.entry((hash_str(t, BUCKET_SEED) % self.dims as u64) as usize).or_default() += 1.0;
        }
        let norm = counts.values().map(|c| c * c).sum::<f64>().sqrt();
        let mut values = vec![0f32; self.dims];
        for (i, c) in counts {
            values[i] = (c / norm) as f32;
        }
        Some(EmbeddingVector { values })
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_DIMS)
    }
}

impl EmbeddingClient for HashingEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, GatewayError> {
        if texts.is_empty() {
            return Err(GatewayError::InvalidRequest("no texts to embed".into()));
        }
        texts
            .iter()
            .map(|t| self.embed_one(t).ok_or_else(|| GatewayError::InvalidRequest("text has no tokens".into())))
            .collect()
    }

    fn provider_tag(&self) -> String {
        format!("hashing-unigram-v1/{}", self.dims)
    }
}

pub fn embed_text(provider: &dyn EmbeddingClient, text: &str) -> Result<EmbeddingVector, RetrievalError> {
    if tokens(text).is_empty() {
        return Err(RetrievalError::EmptyText);
    }
    let mut out = provider.embed(&[text.to_string()])?;
    out.pop().ok_or_else(|| RetrievalError::InvalidVector("provider returned nothing".into()))
}
