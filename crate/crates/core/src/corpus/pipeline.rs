//! ingest → classify → dedup → label.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::classifier::{classify_doc, NgramClassifier};
use super::dedup::{dedup_with_report, DedupConfig};
use super::doc::{LlmLabel, Source, TutorialDoc};
use super::ingest::{ingest_corpus, IngestMode, LineError};
use super::label::{label_doc_llm, LabelFlag};
use super::CorpusError;
use crate::gateway::Gateway;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CorpusReport {
    pub ingested: usize,
    pub passed_classifier: usize,
    pub after_dedup: usize,
    pub labeled_yes: usize,
}

impl CorpusReport {
    pub fn as_tuple(&self) -> (usize, usize, usize, usize) {
        (self.ingested, self.passed_classifier, self.after_dedup, self.labeled_yes)
    }
}

pub struct PipelineSpec<'a> {
    pub inputs: Vec<(PathBuf, Source)>,
    pub mode: IngestMode,
    pub classifier: &'a NgramClassifier,
    pub dedup: DedupConfig,
    pub labeler: &'a Gateway,
    pub label_retries: u32,
    /// Curated corpus (labeled-yes documents).
    pub output: PathBuf,
    /// When set, each stage's survivors are written here as well.
    pub stage_dir: Option<PathBuf>,
}

#[derive(Debug, Default)]
pub struct CorpusRun {
    pub report: CorpusReport,
    pub ingest_errors: Vec<(PathBuf, LineError)>,
    pub degenerate: usize,
    pub label_flags: Vec<(String, LabelFlag)>,
}

pub fn run_corpus_pipeline(spec: &PipelineSpec<'_>) -> Result<CorpusRun, CorpusError> {
    let mut run = CorpusRun::default();
    let mut docs: Vec<TutorialDoc> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (path, source) in &spec.inputs {
        let ingested = ingest_corpus(path, *source, spec.mode)?;
        run.ingest_errors.extend(ingested.errors.into_iter().map(|e| (path.clone(), e)));
        for doc in ingested.docs {
            if seen.insert(doc.id.clone()) {
                docs.push(doc);
            } else {
                let error = LineError { line: 0, message: format!("id {:?} repeats an earlier input file", doc.id) };
                if spec.mode == IngestMode::Strict {
                    return Err(CorpusError::Line { path: path.display().to_string(), error });
                }
                run.ingest_errors.push((path.clone(), error));
            }
        }
    }
    run.report.ingested = docs.len();

    let scored: Vec<(TutorialDoc, bool, bool)> = docs
        .into_par_iter()
        .map(|mut d| {
            let c = classify_doc(spec.classifier, &d);
            d.classifier_score = Some(c.score);
            let pass = spec.classifier.passes(c.score);
            (d, pass, c.degenerate)
        })
        .collect();
    run.degenerate = scored.iter().filter(|(_, _, deg)| *deg).count();
    let passed: Vec<TutorialDoc> = scored.into_iter().filter(|(_, p, _)| *p).map(|(d, _, _)| d).collect();
    run.report.passed_classifier = passed.len();
    write_stage(spec, "classified.jsonl", &passed)?;

    let deduped = dedup_with_report(passed, &spec.dedup).kept;
    run.report.after_dedup = deduped.len();
    write_stage(spec, "deduped.jsonl", &deduped)?;

    let labeled: Vec<(TutorialDoc, Option<LabelFlag>)> = deduped
        .into_par_iter()
        .map(|mut d| {
            let outcome = label_doc_llm(spec.labeler, &d, spec.label_retries);
            d.llm_label = Some(outcome.label);
            (d, outcome.flag)
        })
        .collect();
    let mut curated = Vec::new();
    for (d, flag) in labeled {
        if let Some(f) = flag {
            run.label_flags.push((d.id.clone(), f));
        }
        if d.llm_label == Some(LlmLabel::Yes) {
            curated.push(d);
        }
    }
    run.report.labeled_yes = curated.len();
    crate::io::write_jsonl(&spec.output, &curated)?;
    Ok(run)
}

fn write_stage(spec: &PipelineSpec<'_>, name: &str, docs: &[TutorialDoc]) -> Result<(), CorpusError> {
    if let Some(dir) = &spec.stage_dir {
        crate::io::write_jsonl(&dir.join(name), docs)?;
    }
    Ok(())
}
