//! Task-aware guidance: one `(relevance, summary)` judgement per retrieved
//! tutorial, produced by the guidance model and filtered before it reaches
//! the agent.

pub mod parse;
pub mod prompt;

use serde::{Deserialize, Serialize};

pub use parse::{parse_guidance, parse_guidance_lenient, render_response, GuidanceParseError};
pub use prompt::{render_guidance_prompt, GUIDANCE_PROMPT_VERSION, GUIDANCE_SYSTEM, GUIDANCE_USER};

use crate::corpus::TutorialDoc;
use crate::gateway::{Gateway, GatewayError};
use crate::task::TaskContext;

/// Decoding temperature for guidance at inference time.
pub const INFERENCE_TEMPERATURE: f64 = 0.0;
/// Sampling temperature for rejection-sampling candidates.
pub const RSF_TEMPERATURE: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum GuidanceFlag {
    /// No usable score block; treated as irrelevant.
    ParseError(String),
    /// Relevance 0 came with a summary, which was discarded.
    SummaryDropped,
    /// Relevance 1 without a summary block.
    MissingSummary,
    /// `<summary>` opened but never closed; the remainder was used.
    UnclosedSummary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Guidance {
    /// 0 or 1.
    pub relevance: u8,
    /// Empty whenever `relevance == 0`.
    pub summary: String,
    pub tutorial_id: String,
    pub raw_response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<GuidanceFlag>,
}

impl Guidance {
    pub fn is_relevant(&self) -> bool {
        self.relevance == 1
    }

    /// The tagged response reconstructed from `(relevance, summary)`.
    pub fn completion(&self) -> String {
        render_response(self.relevance, &self.summary)
    }
}

/// Renders the guidance prompt, samples `n` completions and parses each.
/// Unparseable completions come back as flagged relevance-0 guidance.
pub fn generate_guidance(
    gateway: &Gateway,
    ctx: &TaskContext,
    tutorial: &TutorialDoc,
    n: u32,
    temperature: f64,
) -> Result<Vec<Guidance>, GatewayError> {
    let replies = gateway.complete(render_guidance_prompt(ctx, tutorial), temperature, n)?;
    Ok(replies.iter().map(|r| parse_guidance_lenient(r, &tutorial.id)).collect())
}

/// Summaries of the relevant guidance, in input (retrieval rank) order.
pub fn filter_relevant(guidances: &[Guidance]) -> Vec<String> {
    guidances.iter().filter(|g| g.is_relevant()).map(|g| g.summary.clone()).collect()
}
