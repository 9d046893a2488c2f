use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{prompt_hash, render_agent_prompt, AgentError, AgentPipeline, Mode, ScriptedEnv};
use crate::action::{actions_match_with_bounds, parse_action, AgentAction};
use crate::gateway::ChatMessage;
use crate::guidance::Guidance;
use crate::io::{to_jsonl, write_atomic};
use crate::retrieval::RetrievalResult;
use crate::task::{SeedExample, TaskContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Failure,
    StepLimit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreenChange {
    pub from: String,
    pub to: String,
}

/// What the agent saw and did at one step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based.
    pub step: usize,
    pub context: TaskContext,
    /// The guidance set shown to the agent.
    pub sigma: Vec<String>,
    pub prompt_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    /// `None` when the response held no valid action or the call failed.
    pub action: Option<AgentAction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<AgentAction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matched: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition: Option<ScreenChange>,
}

/// Retrieval and guidance detail for one step, kept apart from the
/// agent-facing trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidanceLog {
    pub step: usize,
    pub mode: Mode,
    pub retrieved: Vec<RetrievalResult>,
    pub guidances: Vec<Guidance>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub goal: String,
    pub outcome: Outcome,
    pub steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub mode: Mode,
    pub env_name: Option<String>,
    pub summary: EpisodeSummary,
    pub steps: Vec<StepRecord>,
    pub guidance_log: Vec<GuidanceLog>,
}

#[derive(Serialize)]
struct SummaryLine<'a> {
    episode: &'a EpisodeSummary,
}

impl Episode {
    pub fn outcome(&self) -> Outcome {
        self.summary.outcome
    }

    /// One JSON line per step followed by `{"episode": summary}`.
    pub fn trace_bytes(&self) -> Vec<u8> {
        let mut out = to_jsonl(&self.steps).expect("step records serialize");
        out.extend(serde_json::to_vec(&SummaryLine { episode: &self.summary }).expect("summary serializes"));
        out.push(b'\n');
        out
    }

    pub fn guidance_bytes(&self) -> Vec<u8> {
        to_jsonl(&self.guidance_log).expect("guidance log serializes")
    }

    pub fn sidecar_path(trace: &Path) -> PathBuf {
        let mut s = trace.as_os_str().to_owned();
        s.push(".guidance.jsonl");
        PathBuf::from(s)
    }

    /// Writes the trace and its `.guidance.jsonl` sidecar.
    pub fn write_trace(&self, path: &Path) -> std::io::Result<()> {
        write_atomic(path, &self.trace_bytes())?;
        write_atomic(&Self::sidecar_path(path), &self.guidance_bytes())
    }
}

struct StepDraft {
    record: StepRecord,
    messages: Vec<ChatMessage>,
}

fn draft(step: usize, ctx: TaskContext, sigma: Vec<String>) -> StepDraft {
    let messages = render_agent_prompt(&ctx, &sigma);
    let record = StepRecord {
        step,
        prompt_hash: prompt_hash(&messages),
        context: ctx,
        sigma,
        response: None,
        action: None,
        error: None,
        gold: None,
        matched: None,
        transition: None,
    };
    StepDraft { record, messages }
}

/// Queries the backbone and fills `response`/`action`/`error`.
fn act(pipeline: &AgentPipeline, d: StepDraft) -> StepRecord {
    let mut record = d.record;
    match pipeline.backbone.complete(d.messages, 0.0, 1) {
        Ok(mut replies) => {
            let reply = replies.remove(0);
            match parse_action(&reply) {
                Ok(a) => record.action = Some(a),
                Err(e) => record.error = Some(format!("invalid action: {e}")),
            }
            record.response = Some(reply);
        }
        Err(e) => record.error = Some(format!("backbone gateway: {e}")),
    }
    record
}

fn failed_step(step: usize, ctx: TaskContext, error: String) -> StepRecord {
    let mut d = draft(step, ctx, Vec::new());
    d.record.error = Some(error);
    d.record
}

/// Runs one online episode. Tutorials are retrieved once from the goal;
/// guidance is regenerated at every step over that fixed set.
pub fn run_episode(env: &ScriptedEnv, pipeline: &AgentPipeline) -> Result<Episode, AgentError> {
    env.validate()?;
    pipeline.validate()?;
    let mut episode = Episode {
        mode: pipeline.mode,
        env_name: env.name.clone(),
        summary: EpisodeSummary { goal: env.goal.clone(), outcome: Outcome::StepLimit, steps: 0, error: None },
        steps: Vec::new(),
        guidance_log: Vec::new(),
    };
    let finish = |mut ep: Episode, outcome: Outcome, error: Option<String>| {
        ep.summary.outcome = outcome;
        ep.summary.steps = ep.steps.len();
        ep.summary.error = error;
        Ok(ep)
    };
    if env.satisfied_initially() {
        return finish(episode, Outcome::Success, None);
    }
    let retrieved = match pipeline.retrieve(&env.goal) {
        Ok(r) => r,
        Err(e) => return finish(episode, Outcome::Failure, Some(e)),
    };
    let (hits, docs): (Vec<RetrievalResult>, Vec<_>) = retrieved.into_iter().unzip();

    let mut screen = env.initial_screen.clone();
    let mut history: Vec<AgentAction> = Vec::new();
    for t in 1..=pipeline.max_steps {
        let ctx = TaskContext { goal: env.goal.clone(), observation: env.observe(&screen), history: history.clone() };
        let (sigma, guidances) = match pipeline.step_guidance(&ctx, &docs) {
            Ok(g) => g,
            Err(e) => {
                episode.steps.push(failed_step(t, ctx, e.clone()));
                return finish(episode, Outcome::Failure, Some(e));
            }
        };
        episode.guidance_log.push(GuidanceLog { step: t, mode: pipeline.mode, retrieved: hits.clone(), guidances });
        let mut record = act(pipeline, draft(t, ctx, sigma));
        let Some(action) = record.action.clone() else {
            let err = record.error.clone();
            episode.steps.push(record);
            return finish(episode, Outcome::Failure, err);
        };
        let next = env.step(&screen, &action);
        let done = env.satisfied(&screen, &action, &next);
        record.transition = Some(ScreenChange { from: screen.clone(), to: next.clone() });
        episode.steps.push(record);
        if done {
            return finish(episode, Outcome::Success, None);
        }
        if matches!(action, AgentAction::Stop(_)) {
            return finish(episode, Outcome::Failure, None);
        }
        history.push(action);
        screen = next;
    }
    finish(episode, Outcome::StepLimit, None)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfflineStep {
    pub record: StepRecord,
    pub guidance: GuidanceLog,
}

impl OfflineStep {
    pub fn matched(&self) -> bool {
        self.record.matched.unwrap_or(false)
    }
}

/// One prediction with the gold history injected; no environment stepping.
pub fn run_offline_step(seed: &SeedExample, pipeline: &AgentPipeline) -> Result<OfflineStep, AgentError> {
    pipeline.validate()?;
    let ctx = seed.context();
    if !ctx.is_valid() {
        return Err(AgentError::InvalidContext(format!("seed {:?}", seed.id)));
    }
    let mut guidance = GuidanceLog { step: 1, mode: pipeline.mode, retrieved: Vec::new(), guidances: Vec::new() };
    let prepared = pipeline.retrieve(&seed.goal).and_then(|r| {
        let (hits, docs): (Vec<_>, Vec<_>) = r.into_iter().unzip();
        guidance.retrieved = hits;
        pipeline.step_guidance(&ctx, &docs)
    });
    let mut record = match prepared {
        Ok((sigma, gs)) => {
            guidance.guidances = gs;
            act(pipeline, draft(1, ctx.clone(), sigma))
        }
        Err(e) => failed_step(1, ctx.clone(), e),
    };
    let matched = record
        .action
        .as_ref()
        .is_some_and(|a| actions_match_with_bounds(a, &seed.gold_action, &ctx.observation.elements));
    record.gold = Some(seed.gold_action.clone());
    record.matched = Some(matched);
    Ok(OfflineStep { record, guidance })
}
