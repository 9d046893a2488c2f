//! Two-pass content deduplication.
//!
//! Pass one drops exact duplicates by a hash of the normalized text
//! (lowercased, whitespace collapsed, image references stripped). Pass two
//! drops any survivor whose MinHash-estimated Jaccard similarity over word
//! 3-gram shingles reaches the threshold against a document already kept.
//! The earliest document of every duplicate group is the one kept.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::doc::TutorialDoc;
use crate::text::{hash_bytes, hash_str, normalize, splitmix64, tokens};

const EXACT_SEED: u64 = 0x65_7861_6374;
const SHINGLE_SEED: u64 = 0x73_6869_6e67_6c65;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DedupConfig {
    pub num_perm: usize,
    pub shingle_size: usize,
    pub jaccard_threshold: f64,
    pub seed: u64,
}

impl Default for DedupConfig {
    fn default() -> Self {
        DedupConfig { num_perm: 128, shingle_size: 3, jaccard_threshold: 0.8, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DedupSignature {
    pub exact_hash: u64,
    pub minhash: Vec<u64>,
}

impl DedupSignature {
    pub fn estimated_jaccard(&self, other: &DedupSignature) -> f64 {
        if self.minhash.is_empty() {
            return 0.0;
        }
        let same = self.minhash.iter().zip(&other.minhash).filter(|(a, b)| a == b).count();
        same as f64 / self.minhash.len() as f64
    }
}

pub fn normalized_text(doc: &TutorialDoc) -> String {
    normalize(&doc.text())
}

/// Word shingles of `size` tokens; texts shorter than `size` form one shingle.
pub fn shingles(text: &str, size: usize) -> HashSet<String> {
    let toks = tokens(text);
    if toks.is_empty() {
        return HashSet::new();
    }
    if toks.len() < size {
        return std::iter::once(toks.join(" ")).collect();
    }
    toks.windows(size).map(|w| w.join(" ")).collect()
}

fn minhash(shingle_hashes: &[u64], num_perm: usize, seed: u64) -> Vec<u64> {
    (0..num_perm)
        .map(|j| {
            let key = splitmix64(seed ^ (j as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            shingle_hashes.iter().map(|&h| splitmix64(h ^ key)).min().unwrap_or(u64::MAX)
        })
        .collect()
}

pub fn signature(doc: &TutorialDoc, cfg: &DedupConfig) -> DedupSignature {
    let norm = normalized_text(doc);
    let mut hashes: Vec<u64> = shingles(&norm, cfg.shingle_size).iter().map(|s| hash_str(s, SHINGLE_SEED)).collect();
    hashes.sort_unstable();
    DedupSignature { exact_hash: hash_bytes(norm.as_bytes(), EXACT_SEED), minhash: minhash(&hashes, cfg.num_perm, cfg.seed) }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    Exact,
    NearDuplicate,
}

#[derive(Debug, Default)]
pub struct DedupOutcome {
    pub kept: Vec<TutorialDoc>,
    /// `(dropped id, kept id it duplicates, reason)` in input order.
    pub dropped: Vec<(String, String, DropReason)>,
}

pub fn dedup_with_report(docs: Vec<TutorialDoc>, cfg: &DedupConfig) -> DedupOutcome {
    let sigs: Vec<DedupSignature> = docs.par_iter().map(|d| signature(d, cfg)).collect();
    let mut out = DedupOutcome::default();
    let mut exact_seen: std::collections::HashMap<u64, usize> = std::collections::HashMap::new();
    let mut kept_sigs: Vec<(usize, &DedupSignature)> = Vec::new();
    let mut kept_idx = Vec::new();
    for (i, sig) in sigs.iter().enumerate() {
        if let Some(&k) = exact_seen.get(&sig.exact_hash) {
            out.dropped.push((docs[i].id.clone(), docs[k].id.clone(), DropReason::Exact));
            continue;
        }
        exact_seen.insert(sig.exact_hash, i);
        let near = kept_sigs
            .par_iter()
            .find_first(|(_, s)| s.estimated_jaccard(sig) >= cfg.jaccard_threshold)
            .map(|(k, _)| *k);
        match near {
            Some(k) => out.dropped.push((docs[i].id.clone(), docs[k].id.clone(), DropReason::NearDuplicate)),
            None => {
                kept_sigs.push((i, sig));
                kept_idx.push(i);
            }
        }
    }
    let keep: HashSet<usize> = kept_idx.into_iter().collect();
    out.kept = docs.into_iter().enumerate().filter(|(i, _)| keep.contains(i)).map(|(_, d)| d).collect();
    out
}

/// Kept documents in input order.
pub fn dedup_corpus(docs: Vec<TutorialDoc>, cfg: &DedupConfig) -> Vec<TutorialDoc> {
    dedup_with_report(docs, cfg).kept
}
