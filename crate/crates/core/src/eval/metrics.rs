//! Step-level and episode-level metrics.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::action::{actions_match_with_bounds, click_targets_match, AgentAction, ClickTarget};
use crate::agent::Outcome;
use crate::task::UIElement;

/// Multiset token F1. Both empty gives 1; no overlap gives 0.
pub fn op_f1<S: AsRef<str>>(pred: &[S], gold: &[S]) -> f64 {
    if pred.is_empty() && gold.is_empty() {
        return 1.0;
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in gold {
        *counts.entry(t.as_ref()).or_default() += 1;
    }
    let mut overlap = 0usize;
    for t in pred {
        if let Some(c) = counts.get_mut(t.as_ref()).filter(|c| **c > 0) {
            *c -= 1;
            overlap += 1;
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let p = overlap as f64 / pred.len() as f64;
    let r = overlap as f64 / gold.len() as f64;
    2.0 * p * r / (p + r)
}

/// Whitespace tokens of the action's operation string (kind and normalized
/// value; the element id is excluded).
pub fn op_tokens(action: &AgentAction) -> Vec<String> {
    action.op_string().split_whitespace().map(str::to_string).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub element_correct: bool,
    pub op_f1: f64,
    pub step_success: bool,
}

impl StepOutcome {
    /// Score of a step whose prediction was missing or unparseable.
    pub const INVALID: StepOutcome = StepOutcome { element_correct: false, op_f1: 0.0, step_success: false };
}

fn element_of(action: &AgentAction) -> Option<ClickTarget> {
    match action {
        AgentAction::Click(t) => Some(t.clone()),
        AgentAction::TypeText { target, .. } => Some(ClickTarget::Element(target.clone())),
        _ => None,
    }
}

pub fn score_step(pred: &AgentAction, gold: &AgentAction) -> StepOutcome {
    score_step_with_bounds(pred, gold, &[])
}

/// Coordinate predictions count as the right element when they fall inside
/// the gold element's bounds in `elements`.
pub fn score_step_with_bounds(pred: &AgentAction, gold: &AgentAction, elements: &[UIElement]) -> StepOutcome {
    let element_correct = match (element_of(pred), element_of(gold)) {
        (Some(p), Some(g)) => click_targets_match(&p, &g, elements),
        (None, None) => true,
        _ => false,
    };
    StepOutcome {
        element_correct,
        op_f1: op_f1(&op_tokens(pred), &op_tokens(gold)),
        step_success: actions_match_with_bounds(pred, gold, elements),
    }
}

fn mean<T>(items: &[T], what: &'static str, f: impl Fn(&T) -> f64) -> Result<f64, EvalError> {
    if items.is_empty() {
        return Err(EvalError::Empty(what));
    }
    Ok(items.iter().map(f).sum::<f64>() / items.len() as f64)
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

pub fn ele_acc(outcomes: &[StepOutcome]) -> Result<f64, EvalError> {
    mean(outcomes, "step outcomes", |o| indicator(o.element_correct))
}

pub fn op_f1_mean(outcomes: &[StepOutcome]) -> Result<f64, EvalError> {
    mean(outcomes, "step outcomes", |o| o.op_f1)
}

pub fn step_sr(outcomes: &[StepOutcome]) -> Result<f64, EvalError> {
    mean(outcomes, "step outcomes", |o| indicator(o.step_success))
}

/// Mean per-step correctness, where a step is correct when it fully matches
/// the gold action.
pub fn step_accuracy(outcomes: &[StepOutcome]) -> Result<f64, EvalError> {
    mean(outcomes, "step outcomes", |o| indicator(o.step_success))
}

pub fn episode_sr(outcomes: &[Outcome]) -> Result<f64, EvalError> {
    mean(outcomes, "episodes", |o| indicator(*o == Outcome::Success))
}
