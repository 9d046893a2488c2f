//! Runs every task of a suite under each arm and compares the arms.
//!
//! A suite is a directory holding `suite.json`:
//!
//! ```json
//! {
//!   "name": "keyed-50",
//!   "corpus": "corpus.jsonl",
//!   "envs": ["envs"],
//!   "k": 3,
//!   "gateways": {"backbone": {"kind": "stub", "script": "backbone.json"}},
//!   "expected": {"guided": {"episode_sr": 1.0}}
//! }
//! ```
//!
//! `envs` lists environment files or directories of them (online suites);
//! `seeds` names a seed JSONL file instead (offline suites).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{self, StepOutcome};
use super::EvalError;
use crate::agent::{run_episode, run_offline_step, AgentPipeline, Episode, Mode, Outcome, ScriptedEnv};
use crate::gateway::GatewayConfig;
use crate::io::{read_jsonl, write_atomic, write_json_pretty};
use crate::task::SeedExample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub envs: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    /// Gateway sections overriding the run configuration, by section name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub gateways: BTreeMap<String, GatewayConfig>,
    /// Metric values the fixture is built to produce, per arm.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub expected: BTreeMap<Mode, BTreeMap<String, f64>>,
}

#[derive(Debug, Clone)]
pub enum SuiteTasks {
    Online(Vec<(String, ScriptedEnv)>),
    Offline(Vec<SeedExample>),
}

impl SuiteTasks {
    pub fn len(&self) -> usize {
        match self {
            SuiteTasks::Online(v) => v.len(),
            SuiteTasks::Offline(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone)]
pub struct Suite {
    pub dir: PathBuf,
    pub spec: SuiteSpec,
    pub tasks: SuiteTasks,
}

impl Suite {
    /// Suite gateway overrides with paths resolved against the suite directory.
    pub fn gateway(&self, section: &str) -> Option<GatewayConfig> {
        self.spec.gateways.get(section).map(|g| g.resolved(&self.dir))
    }

    pub fn corpus_path(&self) -> Option<PathBuf> {
        self.spec.corpus.as_ref().map(|p| self.dir.join(p))
    }
}

fn env_files(dir: &Path, entry: &Path) -> Result<Vec<PathBuf>, EvalError> {
    let path = dir.join(entry);
    if !path.is_dir() {
        return Ok(vec![path]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(&path)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

pub fn load_suite(dir: &Path) -> Result<Suite, EvalError> {
    let spec_path = dir.join("suite.json");
    let text = std::fs::read_to_string(&spec_path)
        .map_err(|e| EvalError::Suite(format!("{}: {e}", spec_path.display())))?;
    let spec: SuiteSpec =
        serde_json::from_str(&text).map_err(|e| EvalError::Suite(format!("{}: {e}", spec_path.display())))?;
    let tasks = match (&spec.seeds, spec.envs.is_empty()) {
        (Some(seeds), true) => SuiteTasks::Offline(read_jsonl(&dir.join(seeds))?),
        (None, false) => {
            let mut envs = Vec::new();
            for entry in &spec.envs {
                for file in env_files(dir, entry)? {
                    let env = ScriptedEnv::from_path(&file)?;
                    let id = env
                        .name
                        .clone()
                        .unwrap_or_else(|| file.file_stem().unwrap_or_default().to_string_lossy().into_owned());
                    envs.push((id, env));
                }
            }
            SuiteTasks::Online(envs)
        }
        _ => return Err(EvalError::Suite("exactly one of `envs` and `seeds` must be given".into())),
    };
    if tasks.is_empty() {
        return Err(EvalError::Suite(format!("{} has no tasks", dir.display())));
    }
    Ok(Suite { dir: dir.to_path_buf(), spec, tasks })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRow {
    pub task_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<Outcome>,
    pub steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<StepOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Metrics that apply to the suite kind are present; the rest are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Aggregates {
    pub ele_acc: Option<f64>,
    pub op_f1_mean: Option<f64>,
    pub step_sr: Option<f64>,
    pub step_accuracy: Option<f64>,
    pub episode_sr: Option<f64>,
}

impl Aggregates {
    pub fn named(&self) -> [(&'static str, Option<f64>); 5] {
        [
            ("ele_acc", self.ele_acc),
            ("op_f1_mean", self.op_f1_mean),
            ("step_sr", self.step_sr),
            ("step_accuracy", self.step_accuracy),
            ("episode_sr", self.episode_sr),
        ]
    }

    pub fn get(&self, metric: &str) -> Option<f64> {
        self.named().into_iter().find(|(n, _)| *n == metric).and_then(|(_, v)| v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmReport {
    pub arm: Mode,
    pub tasks: usize,
    pub failures: usize,
    pub aggregates: Aggregates,
    pub rows: Vec<TaskRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    pub metric: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guided_minus_baseline: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guided_minus_vanilla_rag: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<String>,
    pub arms: Vec<ArmReport>,
    pub deltas: Vec<Delta>,
    pub config: serde_json::Value,
}

impl BenchmarkReport {
    pub fn arm(&self, mode: Mode) -> Option<&ArmReport> {
        self.arms.iter().find(|a| a.arm == mode)
    }
}

/// A benchmark report together with the per-task traces it was built from.
#[derive(Debug, Clone)]
pub struct BenchmarkRun {
    pub report: BenchmarkReport,
    /// `(arm, task_id, trace bytes, guidance sidecar bytes)`.
    pub traces: Vec<(Mode, String, Vec<u8>, Vec<u8>)>,
}

impl BenchmarkRun {
    /// Writes `report.json` and `traces/<arm>/<task>.jsonl` under `out_dir`.
    pub fn write(&self, out_dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        let report = out_dir.join("report.json");
        write_json_pretty(&report, &self.report)?;
        let mut written = vec![report];
        for (arm, task, trace, sidecar) in &self.traces {
            let path = out_dir.join("traces").join(arm.as_str()).join(format!("{task}.jsonl"));
            write_atomic(&path, trace)?;
            write_atomic(&Episode::sidecar_path(&path), sidecar)?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Task id, trace bytes and guidance sidecar bytes.
type TaskTrace = (String, Vec<u8>, Vec<u8>);

fn run_arm(tasks: &SuiteTasks, pipeline: &AgentPipeline) -> (ArmReport, Vec<TaskTrace>) {
    let (rows, traces): (Vec<TaskRow>, Vec<Option<TaskTrace>>) = match tasks {
        SuiteTasks::Online(envs) => envs
            .par_iter()
            .map(|(id, env)| match run_episode(env, pipeline) {
                Ok(ep) => (
                    TaskRow {
                        task_id: id.clone(),
                        outcome: Some(ep.outcome()),
                        steps: ep.steps.len(),
                        step: None,
                        error: ep.summary.error.clone(),
                    },
                    Some((id.clone(), ep.trace_bytes(), ep.guidance_bytes())),
                ),
                Err(e) => (
                    TaskRow {
                        task_id: id.clone(),
                        outcome: Some(Outcome::Failure),
                        steps: 0,
                        step: None,
                        error: Some(e.to_string()),
                    },
                    None,
                ),
            })
            .unzip(),
        SuiteTasks::Offline(seeds) => seeds
            .par_iter()
            .map(|seed| match run_offline_step(seed, pipeline) {
                Ok(s) => {
                    let outcome = match &s.record.action {
                        Some(a) => metrics::score_step_with_bounds(a, &seed.gold_action, &seed.observation.elements),
                        None => StepOutcome::INVALID,
                    };
                    let trace = crate::io::to_jsonl(std::slice::from_ref(&s.record)).expect("record serializes");
                    let side = crate::io::to_jsonl(std::slice::from_ref(&s.guidance)).expect("log serializes");
                    (
                        TaskRow {
                            task_id: seed.id.clone(),
                            outcome: None,
                            steps: 1,
                            step: Some(outcome),
                            error: s.record.error.clone(),
                        },
                        Some((seed.id.clone(), trace, side)),
                    )
                }
                Err(e) => (
                    TaskRow {
                        task_id: seed.id.clone(),
                        outcome: None,
                        steps: 0,
                        step: Some(StepOutcome::INVALID),
                        error: Some(e.to_string()),
                    },
                    None,
                ),
            })
            .unzip(),
    };
    let failures = rows.iter().filter(|r| r.error.is_some()).count();
    let aggregates = match tasks {
        SuiteTasks::Online(_) => {
            let outcomes: Vec<Outcome> = rows.iter().filter_map(|r| r.outcome).collect();
            Aggregates { episode_sr: metrics::episode_sr(&outcomes).ok(), ..Default::default() }
        }
        SuiteTasks::Offline(_) => {
            let steps: Vec<StepOutcome> = rows.iter().filter_map(|r| r.step).collect();
            Aggregates {
                ele_acc: metrics::ele_acc(&steps).ok(),
                op_f1_mean: metrics::op_f1_mean(&steps).ok(),
                step_sr: metrics::step_sr(&steps).ok(),
                step_accuracy: metrics::step_accuracy(&steps).ok(),
                episode_sr: None,
            }
        }
    };
    let report = ArmReport { arm: pipeline.mode, tasks: rows.len(), failures, aggregates, rows };
    (report, traces.into_iter().flatten().collect())
}

fn deltas(arms: &[ArmReport]) -> Vec<Delta> {
    let get = |m: Mode| arms.iter().find(|a| a.arm == m).map(|a| a.aggregates);
    let Some(guided) = get(Mode::Guided) else { return Vec::new() };
    guided
        .named()
        .into_iter()
        .filter_map(|(name, g)| {
            let g = g?;
            let minus = |m: Mode| get(m).and_then(|a| a.get(name)).map(|v| g - v);
            Some(Delta {
                metric: name.to_string(),
                guided_minus_baseline: minus(Mode::Baseline),
                guided_minus_vanilla_rag: minus(Mode::VanillaRag),
            })
        })
        .collect()
}

/// Runs every task under every arm. Arms differ only in `mode`; per-task
/// failures are recorded in the rows and the run continues.
pub fn run_benchmark(
    suite: &Suite,
    arms: &[Mode],
    base: &AgentPipeline,
    config: serde_json::Value,
) -> Result<BenchmarkRun, EvalError> {
    if suite.tasks.is_empty() {
        return Err(EvalError::Empty("suite tasks"));
    }
    if arms.is_empty() {
        return Err(EvalError::Empty("arms"));
    }
    let mut reports = Vec::new();
    let mut traces = Vec::new();
    for &arm in arms {
        let pipeline = base.with_mode(arm);
        pipeline.validate()?;
        let (report, arm_traces) = run_arm(&suite.tasks, &pipeline);
        reports.push(report);
        traces.extend(arm_traces.into_iter().map(|(id, t, s)| (arm, id, t, s)));
    }
    let report = BenchmarkReport {
        suite: suite.spec.name.clone(),
        deltas: deltas(&reports),
        arms: reports,
        config,
    };
    Ok(BenchmarkRun { report, traces })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"))
}

/// Plain-text table of the per-arm aggregates and the guided deltas.
pub fn render_table(report: &BenchmarkReport) -> String {
    let header = ["arm", "tasks", "ele_acc", "op_f1", "step_sr", "step_acc", "episode_sr"];
    let mut rows: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for a in &report.arms {
        let g = &a.aggregates;
        rows.push(vec![
            a.arm.to_string(),
            a.tasks.to_string(),
            cell(g.ele_acc),
            cell(g.op_f1_mean),
            cell(g.step_sr),
            cell(g.step_accuracy),
            cell(g.episode_sr),
        ]);
    }
    let widths: Vec<usize> = (0..header.len()).map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for r in &rows {
        let line: Vec<String> = r.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    for d in &report.deltas {
        out.push_str(&format!(
            "delta {}: guided-baseline {} guided-vanilla_rag {}\n",
            d.metric,
            cell(d.guided_minus_baseline),
            cell(d.guided_minus_vanilla_rag)
        ));
    }
    out
}
