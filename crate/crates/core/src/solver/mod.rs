//! Batch solving: one branch stage per topology (splits, disconnections,
//! outage factors), then an injection loop over the task's assignment set.
//!
//! Every task runs on one worker from start to finish and only reads the
//! shared [`BaseCase`], so results do not depend on the worker count.

mod base;
pub(crate) mod kernel;
mod report;
mod task;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use base::{BaseCase, BaseOptions};
pub use kernel::{
    branch_stage, finish_branch_stage, injection_stage, solve_batch, solve_task, task_flows, BranchContext,
    SplitChain, TaskFlows,
};
pub use report::{agg_i, agg_m, N0Entry, N1Entry, SparseReport};
pub use task::{
    canonicalize, dedupe_symmetric_injections, read_tasks, task_from_record, task_to_record, write_tasks,
    CanonicalTask, SplitAction, SplitRecord, TaskRecord, TopologyTask,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Keep a running best report while scanning the injection set.
    #[default]
    OutputFirst,
    /// Scan for the best metric only, then recompute the report for it.
    MetricFirst,
    /// Single-candidate tasks: metric and report in one pass.
    Symmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IslandingPolicy {
    /// Islanding outages make the whole task infeasible.
    Error,
    /// Islanding outages contribute a fixed relative load.
    #[default]
    Penalize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiOutageMethod {
    #[default]
    Modf,
    SequentialLodf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheduler {
    #[default]
    Flat,
    Tree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub mode: Mode,
    pub topk_per_case: usize,
    pub topk_global: usize,
    pub islanding_policy: IslandingPolicy,
    /// Relative load charged per islanding outage under `penalize`.
    pub penalty: f64,
    /// Tasks handed to the worker pool per wave.
    pub max_batch: usize,
    pub multi_outage_method: MultiOutageMethod,
    pub scheduler: Scheduler,
    /// Tree scheduler only: hand the subtrees below the root to workers.
    pub parallel_tree: bool,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            mode: Mode::OutputFirst,
            topk_per_case: 3,
            topk_global: 10,
            islanding_policy: IslandingPolicy::Penalize,
            penalty: 10.0,
            max_batch: 4096,
            multi_outage_method: MultiOutageMethod::Modf,
            scheduler: Scheduler::Flat,
            parallel_tree: false,
            workers: None,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.topk_per_case == 0 || self.topk_global == 0 {
            return bad("top-k sizes must be at least 1");
        }
        if !self.penalty.is_finite() || self.penalty < 0.0 {
            return bad("penalty must be finite and non-negative");
        }
        if self.max_batch == 0 {
            return bad("max_batch must be at least 1");
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1");
        }
        Ok(())
    }

    /// Checks the config against a batch: symmetric mode needs exactly one
    /// injection candidate per task.
    pub fn validate_for(&self, tasks: &[TopologyTask]) -> Result<()> {
        self.validate()?;
        if self.mode == Mode::Symmetric {
            if let Some(i) = tasks.iter().position(|t| t.injection_sets.len() != 1) {
                return Err(Error::InvalidConfig(format!(
                    "symmetric mode needs one injection set per task; task {i} has {}",
                    tasks[i].injection_sets.len()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub feasible: bool,
    /// Why the task could not be solved (singular split, islanding
    /// disconnection, malformed task).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Contingencies that island the grid under this topology.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub islanding_contingencies: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    /// Maximum relative load over N-0 and N-1; infinite for infeasible
    /// tasks (serialized as `null`).
    pub metric: f64,
    /// Index into the task's injection sets of the best candidate.
    pub best_injection: Option<usize>,
    pub report: SparseReport,
    pub diagnostics: Diagnostics,
}

impl SolveResult {
    pub(crate) fn infeasible(error: Option<String>, islanding: Vec<String>) -> Self {
        SolveResult {
            metric: f64::INFINITY,
            best_injection: None,
            report: SparseReport::default(),
            diagnostics: Diagnostics {
                feasible: false,
                error,
                islanding_contingencies: islanding,
            },
        }
    }

    /// One JSON line, with the position of the task in its batch.
    pub fn to_json_line(&self, task_index: usize) -> String {
        let mut v = serde_json::to_value(self).expect("result serialization cannot fail");
        if let serde_json::Value::Object(map) = &mut v {
            map.insert("task".into(), task_index.into());
        }
        serde_json::to_string(&v).expect("result serialization cannot fail")
    }
}

/// Instrumentation shared by both schedulers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SolveCounters {
    pub bsdf_applications: usize,
    /// Peak number of split PTDFs alive at once in one worker, counting the
    /// base matrix.
    pub peak_live_ptdfs: usize,
}
