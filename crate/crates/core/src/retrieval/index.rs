//! Exact cosine index.
//!
//! Binary layout (all integers little-endian):
//!
//! ```text
//! magic    b"TRIX"
//! version  u32 = 1
//! dims     u32
//! count    u64
//! tag_len  u32, provider tag bytes (UTF-8)
//! count × { id_len u32, id bytes (UTF-8), dims × f32 }
//! ```

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::embed::{embed_text, EmbeddingVector};
use super::RetrievalError;
use crate::corpus::TutorialDoc;
use crate::gateway::EmbeddingClient;

const MAGIC: &[u8; 4] = b"TRIX";
const VERSION: u32 = 1;
const EMBED_BATCH: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub tutorial_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    pub tutorial_id: String,
    pub vector: EmbeddingVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TutorialIndex {
    dims: usize,
    provider_tag: String,
    entries: Vec<IndexEntry>,
    ids: HashSet<String>,
}

impl TutorialIndex {
    pub fn new(dims: usize, provider_tag: impl Into<String>) -> Self {
        TutorialIndex { dims, provider_tag: provider_tag.into(), entries: Vec::new(), ids: HashSet::new() }
    }

    pub fn push(&mut self, tutorial_id: impl Into<String>, vector: EmbeddingVector) -> Result<(), RetrievalError> {
        let tutorial_id = tutorial_id.into();
        if vector.dims() != self.dims {
            return Err(RetrievalError::DimMismatch { expected: self.dims, got: vector.dims() });
        }
        if !self.ids.insert(tutorial_id.clone()) {
            return Err(RetrievalError::DuplicateId(tutorial_id));
        }
        self.entries.push(IndexEntry { tutorial_id, vector });
        Ok(())
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn provider_tag(&self) -> &str {
        &self.provider_tag
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    /// Full scan, sorted by score descending then tutorial id ascending.
    pub fn top_k(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<RetrievalResult>, RetrievalError> {
        if k == 0 {
            return Err(RetrievalError::ZeroK);
        }
        if self.entries.is_empty() {
            return Err(RetrievalError::EmptyIndex);
        }
        if query.dims() != self.dims {
            return Err(RetrievalError::DimMismatch { expected: self.dims, got: query.dims() });
        }
        let mut scored: Vec<(f64, &str)> =
            self.entries.iter().map(|e| (query.cosine(&e.vector), e.tutorial_id.as_str())).collect();
        let order = |a: &(f64, &str), b: &(f64, &str)| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1));
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, order);
            scored.truncate(k);
        }
        scored.sort_by(order);
        Ok(scored
            .into_iter()
            .map(|(score, id)| RetrievalResult { tutorial_id: id.to_string(), score })
            .collect())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.dims as u32).to_le_bytes())?;
        w.write_all(&(self.entries.len() as u64).to_le_bytes())?;
        write_str(&mut w, &self.provider_tag)?;
        for e in &self.entries {
            write_str(&mut w, &e.tutorial_id)?;
            for v in e.vector.values() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, RetrievalError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(RetrievalError::Format("bad magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(RetrievalError::Format(format!("unsupported version {version}")));
        }
        let dims = read_u32(&mut r)? as usize;
        let mut count = [0u8; 8];
        r.read_exact(&mut count)?;
        let count = u64::from_le_bytes(count);
        let tag = read_str(&mut r)?;
        let mut index = TutorialIndex::new(dims, tag);
        let mut buf = vec![0u8; dims * 4];
        for _ in 0..count {
            let id = read_str(&mut r)?;
            r.read_exact(&mut buf)?;
            let values = buf.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
            index.push(id, EmbeddingVector::new(values)?)?;
        }
        Ok(index)
    }

    pub fn save(&self, path: &Path) -> Result<(), RetrievalError> {
        Ok(crate::io::write_atomic(path, &self.to_bytes())?)
    }

    pub fn load(path: &Path) -> Result<Self, RetrievalError> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    /// JSONL debug dump: a header line then one line per entry.
    pub fn to_debug_jsonl(&self) -> String {
        let mut out = serde_json::json!({
            "dims": self.dims,
            "provider_tag": self.provider_tag,
            "count": self.entries.len(),
        })
        .to_string();
        out.push('\n');
        for e in &self.entries {
            out.push_str(&serde_json::json!({"tutorial_id": e.tutorial_id, "values": e.vector.values()}).to_string());
            out.push('\n');
        }
        out
    }
}

fn write_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_str<R: Read>(r: &mut R) -> Result<String, RetrievalError> {
    let len = read_u32(r)? as usize;
    let mut b = vec![0u8; len];
    r.read_exact(&mut b)?;
    String::from_utf8(b).map_err(|e| RetrievalError::Format(e.to_string()))
}

/// Embeds title + text blocks of every document, in corpus order.
pub fn build_index(docs: &[TutorialDoc], provider: &dyn EmbeddingClient) -> Result<TutorialIndex, RetrievalError> {
    if docs.is_empty() {
        return Err(RetrievalError::EmptyIndex);
    }
    let texts: Vec<String> = docs
        .iter()
        .map(|d| {
            let t = d.embedding_text();
            if crate::text::tokens(&t).is_empty() {
                Err(RetrievalError::NothingToEmbed(d.id.clone()))
            } else {
                Ok(t)
            }
        })
        .collect::<Result<_, _>>()?;
    let batches: Vec<Vec<EmbeddingVector>> = texts
        .par_chunks(EMBED_BATCH)
        .map(|chunk| {
            let out = provider.embed(chunk)?;
            if out.len() != chunk.len() {
                return Err(RetrievalError::InvalidVector(format!(
                    "provider returned {} vectors for {} texts",
                    out.len(),
                    chunk.len()
                )));
            }
            Ok(out)
        })
        .collect::<Result<_, RetrievalError>>()?;
    let vectors: Vec<EmbeddingVector> = batches.into_iter().flatten().collect();
    let mut index = TutorialIndex::new(vectors[0].dims(), provider.provider_tag());
    for (doc, v) in docs.iter().zip(vectors) {
        index.push(doc.id.clone(), v)?;
    }
    Ok(index)
}

/// Top-k tutorials for a task goal. The query is the goal text alone.
pub fn retrieve_topk(
    index: &TutorialIndex,
    goal: &str,
    k: usize,
    provider: &dyn EmbeddingClient,
) -> Result<Vec<RetrievalResult>, RetrievalError> {
    if k == 0 {
        return Err(RetrievalError::ZeroK);
    }
    if index.is_empty() {
        return Err(RetrievalError::EmptyIndex);
    }
    let query = embed_text(provider, goal)?;
    index.top_k(&query, k)
}
