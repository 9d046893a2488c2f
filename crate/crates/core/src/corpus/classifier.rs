//! Hashed bag-of-n-grams logistic regression, in the spirit of fastText's
//! supervised mode without the embedding layer.
//!
//! A document's features are its word n-grams (orders 1..=`ngram_order`)
//! hashed into `bucket_count` buckets. Each active bucket has value
//! `1/sqrt(#active)`, so the feature vector has unit L2 norm.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::doc::TutorialDoc;
use super::CorpusError;
use crate::text::{hash_str, tokens};

const NGRAM_SEED: u64 = 0x6e67_7261_6d73;
const MAGIC: &[u8; 4] = b"TRCL";
const VERSION: u32 = 1;
pub const MIN_BUCKETS: usize = 1 << 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainParams {
    pub bucket_count: usize,
    pub ngram_order: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub label_threshold: f64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams { bucket_count: 1 << 21, ngram_order: 2, learning_rate: 0.5, epochs: 10, seed: 0, label_threshold: 0.5 }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |m: String| Err(CorpusError::InvalidParams(m));
        if self.bucket_count < MIN_BUCKETS {
            return bad(format!("bucket_count must be >= {MIN_BUCKETS}"));
        }
        if self.ngram_order == 0 {
            return bad("ngram_order must be >= 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        if !(self.label_threshold > 0.0 && self.label_threshold < 1.0) {
            return bad("label_threshold must be in (0,1)".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NgramClassifier {
    pub bucket_count: usize,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub ngram_order: usize,
    pub label_threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub score: f64,
    /// No extractable tokens; the score is `sigmoid(bias)`.
    pub degenerate: bool,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Sorted, deduplicated bucket ids of the document's n-grams.
fn feature_buckets(text: &str, order: usize, buckets: usize) -> Vec<usize> {
    let toks = tokens(text);
    let mut out = Vec::new();
    for n in 1..=order {
        for gram in toks.windows(n) {
            out.push((hash_str(&gram.join(" "), NGRAM_SEED.wrapping_add(n as u64)) % buckets as u64) as usize);
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

impl NgramClassifier {
    fn logit(&self, features: &[usize]) -> f64 {
        if features.is_empty() {
            return self.bias;
        }
        let scale = 1.0 / (features.len() as f64).sqrt();
        self.bias + features.iter().map(|&i| self.weights[i]).sum::<f64>() * scale
    }

    pub fn classify_text(&self, text: &str) -> Classification {
        let f = feature_buckets(text, self.ngram_order, self.bucket_count);
        Classification { score: sigmoid(self.logit(&f)), degenerate: f.is_empty() }
    }

    pub fn passes(&self, score: f64) -> bool {
        score >= self.label_threshold
    }

    /// Sparse little-endian format: header then `(u64 bucket, f64 weight)` for
    /// every nonzero weight.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.bucket_count as u64).to_le_bytes())?;
        w.write_all(&(self.ngram_order as u32).to_le_bytes())?;
        w.write_all(&self.label_threshold.to_le_bytes())?;
        w.write_all(&self.bias.to_le_bytes())?;
        let nz: Vec<(usize, f64)> = self.weights.iter().copied().enumerate().filter(|(_, v)| *v != 0.0).collect();
        w.write_all(&(nz.len() as u64).to_le_bytes())?;
        for (i, v) in nz {
            w.write_all(&(i as u64).to_le_bytes())?;
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, CorpusError> {
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4)?;
        if &b4 != MAGIC {
            return Err(CorpusError::Format("bad magic".into()));
        }
        r.read_exact(&mut b4)?;
        if u32::from_le_bytes(b4) != VERSION {
            return Err(CorpusError::Format("unsupported version".into()));
        }
        let mut u64_ = |r: &mut R| -> std::io::Result<u64> {
            r.read_exact(&mut b8)?;
            Ok(u64::from_le_bytes(b8))
        };
        let bucket_count = u64_(&mut r)? as usize;
        r.read_exact(&mut b4)?;
        let ngram_order = u32::from_le_bytes(b4) as usize;
        let label_threshold = f64::from_bits(u64_(&mut r)?);
        let bias = f64::from_bits(u64_(&mut r)?);
        let nnz = u64_(&mut r)?;
        if bucket_count < MIN_BUCKETS || ngram_order == 0 {
            return Err(CorpusError::Format("invalid header".into()));
        }
        let mut weights = vec![0.0; bucket_count];
        for _ in 0..nnz {
            let i = u64_(&mut r)? as usize;
            let v = f64::from_bits(u64_(&mut r)?);
            *weights.get_mut(i).ok_or_else(|| CorpusError::Format(format!("bucket {i} out of range")))? = v;
        }
        Ok(NgramClassifier { bucket_count, weights, bias, ngram_order, label_threshold })
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(crate::io::write_atomic(path, &buf)?)
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// SGD on the logistic loss; examples are visited in a seeded shuffled order
/// each epoch, so identical inputs give bit-identical weights.
pub fn train_classifier(
    positives: &[TutorialDoc],
    negatives: &[TutorialDoc],
    params: &TrainParams,
) -> Result<NgramClassifier, CorpusError> {
    params.validate()?;
    if positives.is_empty() {
        return Err(CorpusError::EmptyClass("positive"));
    }
    if negatives.is_empty() {
        return Err(CorpusError::EmptyClass("negative"));
    }
    let examples: Vec<(Vec<usize>, f64)> = positives
        .iter()
        .map(|d| (d, 1.0))
        .chain(negatives.iter().map(|d| (d, 0.0)))
        .map(|(d, y)| (feature_buckets(&d.text(), params.ngram_order, params.bucket_count), y))
        .collect();
    let mut model = NgramClassifier {
        bucket_count: params.bucket_count,
        weights: vec![0.0; params.bucket_count],
        bias: 0.0,
        ngram_order: params.ngram_order,
        label_threshold: params.label_threshold,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    for epoch in 1..=params.epochs {
        order.shuffle(&mut rng);
        let mut loss = 0.0;
        for &i in &order {
            let (features, y) = &examples[i];
            let z = model.logit(features);
            let p = sigmoid(z);
            loss += if *y > 0.5 { softplus(-z) } else { softplus(z) };
            let grad = (p - y) * params.learning_rate;
            if !features.is_empty() {
                let scale = 1.0 / (features.len() as f64).sqrt();
                for &f in features {
                    model.weights[f] -= grad * scale;
                }
            }
            model.bias -= grad;
        }
        if !loss.is_finite() || model.bias.is_nan() {
            return Err(CorpusError::NonFiniteLoss { epoch });
        }
        log::debug!("classifier epoch {epoch}: mean loss {:.5}", loss / examples.len() as f64);
    }
    Ok(model)
}

/// Scores a document; the score goes into `classifier_score` downstream.
pub fn classify_doc(model: &NgramClassifier, doc: &TutorialDoc) -> Classification {
    model.classify_text(&doc.text())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs(prefix: &str, texts: &[&str]) -> Vec<TutorialDoc> {
        texts.iter().enumerate().map(|(i, t)| TutorialDoc::from_text(format!("{prefix}{i}"), *t)).collect()
    }

    fn separable() -> (Vec<TutorialDoc>, Vec<TutorialDoc>) {
        let pos = docs("p", &[
            "clicksetting then open the menu",
            "first clicksetting and choose display",
            "the clicksetting button is on top",
            "clicksetting twice to reset",
        ]);
        let neg = docs("n", &[
            "open the menu to choose display",
            "the button is on top of the page",
            "first choose then reset twice",
            "a recipe for bread with flour",
        ]);
        (pos, neg)
    }

    fn small() -> TrainParams {
        TrainParams { bucket_count: 1 << 12, epochs: 30, ..Default::default() }
    }

    #[test]
    fn separable_fixture_trains_to_full_accuracy() {
        let (pos, neg) = separable();
        let m = train_classifier(&pos, &neg, &small()).unwrap();
        for d in &pos {
            assert!(m.passes(classify_doc(&m, d).score), "{}", d.id);
        }
        for d in &neg {
            assert!(!m.passes(classify_doc(&m, d).score), "{}", d.id);
        }
        let only_pos = TutorialDoc::from_text("q", "clicksetting");
        assert!(classify_doc(&m, &only_pos).score > 0.9);
    }

    #[test]
    fn training_is_deterministic() {
        let (pos, neg) = separable();
        let a = train_classifier(&pos, &neg, &small()).unwrap();
        let b = train_classifier(&pos, &neg, &small()).unwrap();
        assert_eq!(a.weights.iter().map(|w| w.to_bits()).collect::<Vec<_>>(), b.weights.iter().map(|w| w.to_bits()).collect::<Vec<_>>());
        assert_eq!(a.bias.to_bits(), b.bias.to_bits());
    }

    #[test]
    fn empty_doc_scores_sigmoid_bias() {
        let (pos, neg) = separable();
        let m = train_classifier(&pos, &neg, &small()).unwrap();
        let c = classify_doc(&m, &TutorialDoc::from_text("e", " .. "));
        assert!(c.degenerate);
        assert_eq!(c.score, sigmoid(m.bias));
    }

    #[test]
    fn parameter_and_class_errors() {
        let (pos, neg) = separable();
        assert!(matches!(train_classifier(&[], &neg, &small()), Err(CorpusError::EmptyClass("positive"))));
        assert!(matches!(train_classifier(&pos, &[], &small()), Err(CorpusError::EmptyClass("negative"))));
        let tiny = TrainParams { bucket_count: 512, ..small() };
        assert!(matches!(train_classifier(&pos, &neg, &tiny), Err(CorpusError::InvalidParams(_))));
        let huge_lr = TrainParams { learning_rate: f64::MAX, ..small() };
        assert!(matches!(train_classifier(&pos, &neg, &huge_lr), Err(CorpusError::NonFiniteLoss { epoch: 1 })));
    }

    #[test]
    fn save_load_round_trip() {
        let (pos, neg) = separable();
        let m = train_classifier(&pos, &neg, &small()).unwrap();
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        assert_eq!(NgramClassifier::read_from(buf.as_slice()).unwrap(), m);
    }
}
