//! Corpus JSONL reader.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Lines};
use std::path::Path;

use serde::Deserialize;

use super::doc::{Block, LlmLabel, Source, TutorialDoc};
use super::CorpusError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IngestMode {
    Strict,
    #[default]
    SkipAndLog,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

#[derive(Deserialize)]
struct RawDoc {
    #[serde(default)]
    id: Option<String>,
    #[serde(default)]
    source: Option<Source>,
    #[serde(default)]
    url: Option<String>,
    #[serde(default)]
    title: Option<String>,
    blocks: Vec<Block>,
    #[serde(default)]
    category: Option<String>,
    #[serde(default)]
    classifier_score: Option<f64>,
    #[serde(default)]
    llm_label: Option<LlmLabel>,
}

/// Streams documents from JSONL, one result per non-blank line.
pub struct CorpusReader<R> {
    lines: Lines<R>,
    source: Source,
    line_no: usize,
    seen: HashSet<String>,
}

impl<R: BufRead> CorpusReader<R> {
    pub fn new(reader: R, source: Source) -> Self {
        CorpusReader { lines: reader.lines(), source, line_no: 0, seen: HashSet::new() }
    }

    fn parse(&mut self, line: &str) -> Result<TutorialDoc, String> {
        let raw: RawDoc = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let source = raw.source.unwrap_or(self.source);
        let id = raw.id.unwrap_or_else(|| format!("{}:{}", source.as_str(), self.line_no));
        let doc = TutorialDoc {
            id,
            source,
            url: raw.url,
            title: raw.title,
            blocks: raw.blocks,
            category: raw.category,
            classifier_score: raw.classifier_score,
            llm_label: raw.llm_label,
        };
        doc.validate()?;
        if !self.seen.insert(doc.id.clone()) {
            return Err(format!("duplicate id {:?}", doc.id));
        }
        Ok(doc)
    }
}

impl<R: BufRead> Iterator for CorpusReader<R> {
    type Item = Result<TutorialDoc, LineError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = self.lines.next()?;
            self.line_no += 1;
            let line = match line {
                Ok(l) => l,
                Err(e) => return Some(Err(LineError { line: self.line_no, message: e.to_string() })),
            };
            if line.trim().is_empty() {
                continue;
            }
            let line_no = self.line_no;
            return Some(self.parse(&line).map_err(|message| LineError { line: line_no, message }));
        }
    }
}

#[derive(Debug, Default)]
pub struct Ingested {
    pub docs: Vec<TutorialDoc>,
    pub errors: Vec<LineError>,
}

pub fn ingest_corpus(path: &Path, source: Source, mode: IngestMode) -> Result<Ingested, CorpusError> {
    let reader = CorpusReader::new(BufReader::new(File::open(path)?), source);
    let mut out = Ingested::default();
    for item in reader {
        match item {
            Ok(doc) => out.docs.push(doc),
            Err(error) if mode == IngestMode::Strict => {
                return Err(CorpusError::Line { path: path.display().to_string(), error })
            }
            Err(error) => {
                log::warn!("{}:{}: skipping line: {}", path.display(), error.line, error.message);
                out.errors.push(error);
            }
        }
    }
    Ok(out)
}
