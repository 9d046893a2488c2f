use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{sidecar, RowMeta, RsfError, TrainingHints, TrainingRow};
use crate::gateway::Gateway;
use crate::guidance::{parse_guidance, render_guidance_prompt, GUIDANCE_PROMPT_VERSION, INFERENCE_TEMPERATURE};
use crate::io::write_jsonl;
use crate::retrieval::Retriever;
use crate::task::SeedExample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SftStats {
    pub seeds: usize,
    pub pairs: usize,
    pub emitted: usize,
    pub quarantined: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Quarantined {
    seed_id: String,
    tutorial_id: String,
    reason: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    raw: Option<String>,
}

/// One teacher response per (seed, retrieved tutorial). Responses that do
/// not parse, and calls that fail, go to `<out>.quarantine.jsonl`.
pub fn build_sft_dataset(
    teacher: &Gateway,
    seeds: &[SeedExample],
    retriever: &Retriever,
    k: usize,
    out: &Path,
) -> Result<SftStats, RsfError> {
    if k == 0 {
        return Err(RsfError::InvalidParams("k must be at least 1".into()));
    }
    let mut items = Vec::new();
    for seed in seeds {
        for (hit, doc) in retriever.retrieve(&seed.goal, k)? {
            items.push((seed, hit.tutorial_id, doc));
        }
    }
    let results: Vec<Result<TrainingRow, Quarantined>> = items
        .par_iter()
        .map(|(seed, tutorial_id, doc)| {
            let prompt = render_guidance_prompt(&seed.context(), doc);
            let quarantine = |reason: String, raw: Option<String>| Quarantined {
                seed_id: seed.id.clone(),
                tutorial_id: tutorial_id.clone(),
                reason,
                raw,
            };
            let reply = match teacher.complete(prompt.clone(), INFERENCE_TEMPERATURE, 1) {
                Ok(mut r) => r.remove(0),
                Err(e) => return Err(quarantine(format!("gateway: {e}"), None)),
            };
            let parsed = parse_guidance(&reply, tutorial_id).map_err(|e| quarantine(e.to_string(), Some(reply.clone())))?;
            Ok(TrainingRow {
                prompt,
                completion: reply,
                meta: RowMeta {
                    seed_id: seed.id.clone(),
                    tutorial_id: tutorial_id.clone(),
                    relevance: parsed.relevance,
                    prompt_version: GUIDANCE_PROMPT_VERSION.into(),
                    teacher_tag: Some(teacher.model_tag.clone()),
                    training: TrainingHints::sft(),
                },
            })
        })
        .collect();
    let (rows, bad): (Vec<_>, Vec<_>) = results.into_iter().partition(Result::is_ok);
    let rows: Vec<TrainingRow> = rows.into_iter().map(Result::unwrap).collect();
    let bad: Vec<Quarantined> = bad.into_iter().map(|r| r.unwrap_err()).collect();
    write_jsonl(out, &rows)?;
    write_jsonl(&sidecar(out, "quarantine.jsonl"), &bad)?;
    if rows.is_empty() {
        log::warn!("no SFT records emitted; {} quarantined", bad.len());
    }
    Ok(SftStats { seeds: seeds.len(), pairs: items.len(), emitted: rows.len(), quarantined: bad.len() })
}
