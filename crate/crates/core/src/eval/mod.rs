//! Metrics over offline step predictions and online episodes, and the
//! multi-arm benchmark runner.

pub mod bench;
pub mod metrics;

use thiserror::Error;

pub use bench::{
    load_suite, render_table, run_benchmark, Aggregates, ArmReport, BenchmarkReport, BenchmarkRun, Delta, Suite,
    SuiteSpec, SuiteTasks, TaskRow,
};
pub use metrics::{
    ele_acc, episode_sr, op_f1, op_f1_mean, op_tokens, score_step, score_step_with_bounds, step_accuracy, step_sr,
    StepOutcome,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot aggregate an empty set of {0}")]
    Empty(&'static str),
    #[error("suite: {0}")]
    Suite(String),
    #[error(transparent)]
    Agent(#[from] crate::agent::AgentError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
