use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Mint,
    Omnicorpus,
    Wikihow,
    Custom,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Mint => "mint",
            Source::Omnicorpus => "omnicorpus",
            Source::Wikihow => "wikihow",
            Source::Custom => "custom",
        }
    }
}

impl std::str::FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mint" => Ok(Source::Mint),
            "omnicorpus" => Ok(Source::Omnicorpus),
            "wikihow" => Ok(Source::Wikihow),
            "custom" => Ok(Source::Custom),
            other => Err(format!("unknown source {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Block {
    Text { text: String },
    Image { uri: String },
}

impl Block {
    pub fn text(s: impl Into<String>) -> Self {
        Block::Text { text: s.into() }
    }

    pub fn image(uri: impl Into<String>) -> Self {
        Block::Image { uri: uri.into() }
    }
}

/// LLM quality label; an absent label (`null`) means unlabeled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LlmLabel {
    Yes,
    No,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TutorialDoc {
    pub id: String,
    pub source: Source,
    pub url: Option<String>,
    pub title: Option<String>,
    pub blocks: Vec<Block>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    pub classifier_score: Option<f64>,
    pub llm_label: Option<LlmLabel>,
}

impl TutorialDoc {
    pub fn new(id: impl Into<String>, source: Source, blocks: Vec<Block>) -> Self {
        TutorialDoc {
            id: id.into(),
            source,
            url: None,
            title: None,
            blocks,
            category: None,
            classifier_score: None,
            llm_label: None,
        }
    }

    pub fn from_text(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self::new(id, Source::Custom, vec![Block::text(text)])
    }

    /// Text blocks joined by newlines; image references are dropped.
    pub fn text(&self) -> String {
        self.text_blocks().collect::<Vec<_>>().join("\n")
    }

    pub fn text_blocks(&self) -> impl Iterator<Item = &str> {
        self.blocks.iter().filter_map(|b| match b {
            Block::Text { text } => Some(text.as_str()),
            Block::Image { .. } => None,
        })
    }

    /// Title followed by the text blocks, newline separated.
    pub fn embedding_text(&self) -> String {
        let mut parts: Vec<&str> = Vec::new();
        if let Some(t) = self.title.as_deref().filter(|t| !t.trim().is_empty()) {
            parts.push(t);
        }
        parts.extend(self.text_blocks().filter(|t| !t.trim().is_empty()));
        parts.join("\n")
    }

    /// Checks the per-document invariants; uniqueness of ids is the reader's job.
    pub fn validate(&self) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("id is empty".into());
        }
        if self.blocks.is_empty() {
            return Err("blocks is empty".into());
        }
        if !self.blocks.iter().any(|b| matches!(b, Block::Text { .. })) {
            return Err("no text block".into());
        }
        if let Some(s) = self.classifier_score {
            if !(0.0..=1.0).contains(&s) {
                return Err(format!("classifier_score {s} outside [0,1]"));
            }
        }
        Ok(())
    }
}
