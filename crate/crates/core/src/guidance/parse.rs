//! Parsing of the tagged guidance format:
//!
//! ```text
//! <score>
//! 1
//! </score>
//! <summary>
//! ...
//! </summary>
//! ```
//!
//! The first block of each tag wins. Irrelevant guidance may omit the summary.

use thiserror::Error;

use super::{Guidance, GuidanceFlag};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GuidanceParseError {
    #[error("no <score>...</score> block")]
    MissingScore,
    #[error("score {0:?} is not 0 or 1")]
    BadScore(String),
}

/// Content of the first `<tag>...</tag>` block. `Err(rest)` when the tag
/// opens but never closes.
fn block<'a>(text: &'a str, tag: &str) -> Option<Result<&'a str, &'a str>> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let start = text.find(&open)? + open.len();
    let rest = &text[start..];
    Some(match rest.find(&close) {
        Some(end) => Ok(&rest[..end]),
        None => Err(rest),
    })
}

pub fn parse_guidance(text: &str, tutorial_id: &str) -> Result<Guidance, GuidanceParseError> {
    let score = match block(text, "score") {
        Some(Ok(s)) => s.trim(),
        _ => return Err(GuidanceParseError::MissingScore),
    };
    let relevance = match score {
        "0" => 0u8,
        "1" => 1u8,
        other => return Err(GuidanceParseError::BadScore(other.to_string())),
    };
    let (mut summary, mut flag) = match block(text, "summary") {
        Some(Ok(s)) => (s.trim().to_string(), None),
        Some(Err(rest)) => (rest.trim().to_string(), Some(GuidanceFlag::UnclosedSummary)),
        None => (String::new(), (relevance == 1).then_some(GuidanceFlag::MissingSummary)),
    };
    if relevance == 0 && !summary.is_empty() {
        summary.clear();
        flag = Some(GuidanceFlag::SummaryDropped);
    }
    Ok(Guidance { relevance, summary, tutorial_id: tutorial_id.to_string(), raw_response: text.to_string(), flag })
}

/// Never fails: unparseable output becomes flagged `(0, "")` so that it can
/// not reach the agent.
pub fn parse_guidance_lenient(text: &str, tutorial_id: &str) -> Guidance {
    parse_guidance(text, tutorial_id).unwrap_or_else(|e| {
        log::debug!("unparseable guidance for {tutorial_id}: {e}");
        Guidance {
            relevance: 0,
            summary: String::new(),
            tutorial_id: tutorial_id.to_string(),
            raw_response: text.to_string(),
            flag: Some(GuidanceFlag::ParseError(e.to_string())),
        }
    })
}

/// Renders `(relevance, summary)` in the tagged format. Irrelevant guidance
/// is score-only.
pub fn render_response(relevance: u8, summary: &str) -> String {
    if relevance == 0 {
        "<score>\n0\n</score>".to_string()
    } else {
        format!("<score>\n{relevance}\n</score>\n<summary>\n{summary}\n</summary>")
    }
}
