//! Rejection-sampling factory: sample `m` guidances per (seed, tutorial),
//! replay each through the frozen backbone, keep those that lead to the gold
//! action, then drop conflicting and duplicate keeps.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{sidecar, RowMeta, RsfError, TrainingHints, TrainingRow};
use crate::action::{actions_match_with_bounds, parse_action, AgentAction};
use crate::agent::render_agent_prompt;
use crate::corpus::TutorialDoc;
use crate::gateway::{ChatMessage, Gateway, GatewayError};
use crate::guidance::{generate_guidance, render_guidance_prompt, Guidance, GUIDANCE_PROMPT_VERSION};
use crate::io::{write_json_pretty, write_jsonl};
use crate::retrieval::Retriever;
use crate::task::SeedExample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscardReason {
    WrongAction,
    ConflictingLabels,
    Duplicate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsfRecord {
    pub seed_id: String,
    pub tutorial_id: String,
    pub candidate: Guidance,
    /// `None` when the backbone's reply held no valid action.
    pub replay_action: Option<AgentAction>,
    pub retained: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discard_reason: Option<DiscardReason>,
    /// The guidance prompt the candidate answers.
    pub prompt: Vec<ChatMessage>,
}

impl RsfRecord {
    fn discard(&mut self, reason: DiscardReason) {
        self.retained = false;
        self.discard_reason = Some(reason);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RsfParams {
    pub k: usize,
    pub m: u32,
    pub temperature: f64,
}

impl Default for RsfParams {
    fn default() -> Self {
        RsfParams { k: 3, m: 4, temperature: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DiscardCounts {
    pub wrong_action: usize,
    pub conflicting_labels: usize,
    pub duplicate: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsfStats {
    pub sampled: usize,
    /// Replay matched gold, before conflict and duplicate removal.
    pub matched: usize,
    pub exported: usize,
    pub discarded: DiscardCounts,
    /// (seed, tutorial) pairs skipped because a gateway call failed.
    pub gateway_failures: usize,
    pub training: TrainingHints,
}

pub fn sample_candidates(
    gateway: &Gateway,
    seed: &SeedExample,
    tutorial: &TutorialDoc,
    m: u32,
    temperature: f64,
) -> Result<Vec<Guidance>, GatewayError> {
    generate_guidance(gateway, &seed.context(), tutorial, m, temperature)
}

/// Replays every candidate through the backbone. Relevant candidates add
/// their summary to the agent prompt; irrelevant ones replay the baseline
/// prompt. Every candidate yields a record, retained or not.
pub fn replay_filter(
    backbone: &Gateway,
    seed: &SeedExample,
    tutorial: &TutorialDoc,
    candidates: Vec<Guidance>,
) -> Result<Vec<RsfRecord>, GatewayError> {
    let ctx = seed.context();
    let guidance_prompt = render_guidance_prompt(&ctx, tutorial);
    candidates
        .into_iter()
        .map(|candidate| {
            let sigma: Vec<String> =
                if candidate.is_relevant() { vec![candidate.summary.clone()] } else { Vec::new() };
            let reply = backbone.complete(render_agent_prompt(&ctx, &sigma), 0.0, 1)?.remove(0);
            let replay_action = parse_action(&reply).ok();
            let retained = replay_action
                .as_ref()
                .is_some_and(|a| actions_match_with_bounds(a, &seed.gold_action, &ctx.observation.elements));
            Ok(RsfRecord {
                seed_id: seed.id.clone(),
                tutorial_id: tutorial.id.clone(),
                candidate,
                replay_action,
                retained,
                discard_reason: (!retained).then_some(DiscardReason::WrongAction),
                prompt: guidance_prompt.clone(),
            })
        })
        .collect()
}

/// Applies the discard rules to the records of one (seed, tutorial) pair.
///
/// If the retained records carry both relevance labels, every record of the
/// pair is discarded; records already discarded for a wrong action keep that
/// reason. Otherwise retained candidates identical to an earlier retained one
/// are marked duplicate.
pub fn resolve_conflicts(mut records: Vec<RsfRecord>) -> Vec<RsfRecord> {
    let labels: HashSet<u8> = records.iter().filter(|r| r.retained).map(|r| r.candidate.relevance).collect();
    if labels.len() > 1 {
        for r in records.iter_mut().filter(|r| r.retained) {
            r.discard(DiscardReason::ConflictingLabels);
        }
        return records;
    }
    let mut seen: HashSet<(u8, String)> = HashSet::new();
    for r in records.iter_mut().filter(|r| r.retained) {
        if !seen.insert((r.candidate.relevance, r.candidate.summary.clone())) {
            r.discard(DiscardReason::Duplicate);
        }
    }
    records
}

/// Groups by (seed, tutorial), keeping first-appearance order, and resolves
/// each group.
pub fn resolve_all(records: Vec<RsfRecord>) -> Vec<RsfRecord> {
    let mut order: Vec<(String, String)> = Vec::new();
    let mut groups: HashMap<(String, String), Vec<RsfRecord>> = HashMap::new();
    for r in records {
        let key = (r.seed_id.clone(), r.tutorial_id.clone());
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r);
    }
    order.into_iter().flat_map(|k| resolve_conflicts(groups.remove(&k).unwrap())).collect()
}

/// Writes retained records as `{prompt, completion, meta}` rows to `out` and
/// every record to `<out>.records.jsonl`.
pub fn export_rsf_dataset(records: &[RsfRecord], out: &Path) -> Result<RsfStats, RsfError> {
    let mut discarded = DiscardCounts::default();
    let mut matched = 0;
    for r in records {
        match r.discard_reason {
            None => matched += 1,
            Some(DiscardReason::WrongAction) => discarded.wrong_action += 1,
            Some(DiscardReason::ConflictingLabels) => {
                matched += 1;
                discarded.conflicting_labels += 1
            }
            Some(DiscardReason::Duplicate) => {
                matched += 1;
                discarded.duplicate += 1
            }
        }
    }
    let rows: Vec<TrainingRow> = records
        .iter()
        .filter(|r| r.retained)
        .map(|r| TrainingRow {
            prompt: r.prompt.clone(),
            completion: r.candidate.completion(),
            meta: RowMeta {
                seed_id: r.seed_id.clone(),
                tutorial_id: r.tutorial_id.clone(),
                relevance: r.candidate.relevance,
                prompt_version: GUIDANCE_PROMPT_VERSION.into(),
                teacher_tag: None,
                training: TrainingHints::rsf(),
            },
        })
        .collect();
    if rows.is_empty() {
        log::warn!("no RSF records retained; writing an empty dataset");
    }
    write_jsonl(out, &rows)?;
    write_jsonl(&sidecar(out, "records.jsonl"), records)?;
    Ok(RsfStats {
        sampled: records.len(),
        matched,
        exported: rows.len(),
        discarded,
        gateway_failures: 0,
        training: TrainingHints::rsf(),
    })
}

/// The full factory: retrieve, sample, replay, resolve, export. Writes the
/// stats to `report` when given.
pub fn build_rsf_dataset(
    guidance_model: &Gateway,
    backbone: &Gateway,
    seeds: &[SeedExample],
    retriever: &Retriever,
    params: RsfParams,
    out: &Path,
    report: Option<&Path>,
) -> Result<RsfStats, RsfError> {
    if params.k == 0 || params.m == 0 {
        return Err(RsfError::InvalidParams("k and m must be at least 1".into()));
    }
    if params.temperature.is_nan() || params.temperature < 0.0 {
        return Err(RsfError::InvalidParams("temperature must be non-negative".into()));
    }
    let mut items = Vec::new();
    for seed in seeds {
        for (_, doc) in retriever.retrieve(&seed.goal, params.k)? {
            items.push((seed, doc));
        }
    }
    let groups: Vec<Result<Vec<RsfRecord>, GatewayError>> = items
        .par_iter()
        .map(|(seed, doc)| {
            let candidates = sample_candidates(guidance_model, seed, doc, params.m, params.temperature)?;
            Ok(resolve_conflicts(replay_filter(backbone, seed, doc, candidates)?))
        })
        .collect();
    let mut records = Vec::new();
    let mut failures = 0;
    for (g, (seed, doc)) in groups.into_iter().zip(&items) {
        match g {
            Ok(rs) => records.extend(rs),
            Err(e) => {
                log::warn!("seed {} tutorial {}: {e}", seed.id, doc.id);
                failures += 1;
            }
        }
    }
    let mut stats = export_rsf_dataset(&records, out)?;
    stats.gateway_failures = failures;
    if let Some(path) = report {
        write_json_pretty(path, &stats)?;
    }
    Ok(stats)
}
