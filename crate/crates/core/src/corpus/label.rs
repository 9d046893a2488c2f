//! Chat-model labeling of candidate tutorials with the GUI-tutorial prompt.

use serde::Serialize;

use super::doc::{LlmLabel, TutorialDoc};
use crate::gateway::{ChatMessage, Gateway};
use crate::text::fill_template;

pub const LABELING_PROMPT_VERSION: &str = "labeling_v1";
pub const LABELING_SYSTEM: &str = include_str!("../../assets/labeling_v1.system.txt");
pub const LABELING_USER: &str = include_str!("../../assets/labeling_v1.user.txt");

pub fn render_labeling_prompt(doc: &TutorialDoc) -> Vec<ChatMessage> {
    vec![
        ChatMessage::system(LABELING_SYSTEM),
        ChatMessage::user(fill_template(LABELING_USER, &[("content", &doc.text())])),
    ]
}

/// `yes`/`no` when the reply starts with either word (case-insensitive,
/// leading whitespace ignored).
pub fn parse_label(response: &str) -> Option<LlmLabel> {
    let r = response.trim_start().to_lowercase();
    if r.starts_with("yes") {
        Some(LlmLabel::Yes)
    } else if r.starts_with("no") {
        Some(LlmLabel::No)
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "flag", rename_all = "snake_case")]
pub enum LabelFlag {
    /// Every attempt produced something other than Yes/No.
    Unparseable { attempts: u32, last_response: String },
    Transport { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelOutcome {
    pub label: LlmLabel,
    pub flag: Option<LabelFlag>,
}

/// Labels one document. Unparseable replies are retried up to `retries`
/// times; when they never resolve, or the gateway fails, the document is
/// labeled `no` and flagged.
pub fn label_doc_llm(gateway: &Gateway, doc: &TutorialDoc, retries: u32) -> LabelOutcome {
    let messages = render_labeling_prompt(doc);
    let mut last = String::new();
    for _ in 0..=retries {
        match gateway.complete(messages.clone(), 0.0, 1) {
            Ok(mut replies) => {
                last = replies.pop().unwrap_or_default();
                if let Some(label) = parse_label(&last) {
                    return LabelOutcome { label, flag: None };
                }
            }
            Err(e) => {
                log::warn!("labeling {} failed: {e}", doc.id);
                return LabelOutcome { label: LlmLabel::No, flag: Some(LabelFlag::Transport { error: e.to_string() }) };
            }
        }
    }
    log::warn!("labeling {}: unusable reply {:?}", doc.id, crate::text::truncate_chars(&last, 80));
    LabelOutcome {
        label: LlmLabel::No,
        flag: Some(LabelFlag::Unparseable { attempts: retries + 1, last_response: last }),
    }
}
