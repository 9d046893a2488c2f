//! The frozen agent's harness: prompt construction with optional guidance,
//! a scripted environment, and the episode and single-step loops.

pub mod env;
pub mod episode;
pub mod prompt;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use env::{GoalPredicate, ScriptedEnv, Screen, Transition};
pub use episode::{run_episode, run_offline_step, Episode, EpisodeSummary, GuidanceLog, OfflineStep, Outcome, StepRecord};
pub use prompt::{prompt_hash, raw_tutorial_text, render_agent_prompt, AGENT_PROMPT_VERSION, GUIDANCE_DELIMITER};

use crate::corpus::TutorialDoc;
use crate::gateway::Gateway;
use crate::guidance::{filter_relevant, generate_guidance, Guidance, INFERENCE_TEMPERATURE};
use crate::retrieval::{RetrievalResult, Retriever};
use crate::task::TaskContext;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("invalid environment: {0}")]
    InvalidEnv(String),
    #[error("invalid task context: {0}")]
    InvalidContext(String),
    #[error("pipeline configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which augmentation the agent runs with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// No retrieval, no guidance.
    Baseline,
    /// Raw text of every retrieved tutorial.
    VanillaRag,
    /// Relevance-filtered task-aware summaries.
    #[default]
    Guided,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Baseline, Mode::VanillaRag, Mode::Guided];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::VanillaRag => "vanilla_rag",
            Mode::Guided => "guided",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown mode {s:?} (expected baseline, vanilla_rag or guided)"))
    }
}

/// Everything an episode needs besides the environment.
#[derive(Debug, Clone)]
pub struct AgentPipeline {
    pub mode: Mode,
    pub k: usize,
    pub max_steps: usize,
    pub max_tutorial_chars: usize,
    pub backbone: Gateway,
    /// Required in guided mode.
    pub guidance: Option<Gateway>,
    /// Required unless the mode is baseline.
    pub retriever: Option<Retriever>,
}

impl AgentPipeline {
    pub fn new(mode: Mode, backbone: Gateway) -> Self {
        AgentPipeline { mode, k: 3, max_steps: 15, max_tutorial_chars: 8000, backbone, guidance: None, retriever: None }
    }

    pub fn with_mode(&self, mode: Mode) -> Self {
        AgentPipeline { mode, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if self.max_steps == 0 {
            return Err(AgentError::Config("max_steps must be at least 1".into()));
        }
        if self.mode != Mode::Baseline {
            if self.k == 0 {
                return Err(AgentError::Config("k must be at least 1".into()));
            }
            if self.retriever.is_none() {
                return Err(AgentError::Config(format!("mode {} needs a tutorial index", self.mode)));
            }
        }
        if self.mode == Mode::Guided && self.guidance.is_none() {
            return Err(AgentError::Config("guided mode needs a guidance gateway".into()));
        }
        Ok(())
    }

    /// Retrieval for one goal; baseline retrieves nothing.
    pub(crate) fn retrieve(&self, goal: &str) -> Result<Vec<(RetrievalResult, TutorialDoc)>, String> {
        if self.mode == Mode::Baseline {
            return Ok(Vec::new());
        }
        let retriever = self.retriever.as_ref().ok_or("no tutorial index")?;
        let hits = retriever.retrieve(goal, self.k).map_err(|e| format!("retrieval: {e}"))?;
        Ok(hits.into_iter().map(|(h, d)| (h, d.clone())).collect())
    }

    /// `(σ, guidances)` for one step over the episode's tutorials.
    pub(crate) fn step_guidance(
        &self,
        ctx: &TaskContext,
        tutorials: &[TutorialDoc],
    ) -> Result<(Vec<String>, Vec<Guidance>), String> {
        match self.mode {
            Mode::Baseline => Ok((Vec::new(), Vec::new())),
            Mode::VanillaRag => Ok((
                tutorials.iter().map(|d| raw_tutorial_text(d, self.max_tutorial_chars)).collect(),
                Vec::new(),
            )),
            Mode::Guided => {
                let gw = self.guidance.as_ref().ok_or("no guidance gateway")?;
                let per_doc: Vec<Vec<Guidance>> = tutorials
                    .par_iter()
                    .map(|d| generate_guidance(gw, ctx, d, 1, INFERENCE_TEMPERATURE))
                    .collect::<Result<_, _>>()
                    .map_err(|e| format!("guidance gateway: {e}"))?;
                let guidances: Vec<Guidance> = per_doc.into_iter().flatten().collect();
                Ok((filter_relevant(&guidances), guidances))
            }
        }
    }
}
