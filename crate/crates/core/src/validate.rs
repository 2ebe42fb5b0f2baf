//! Sampled comparison of the batch solver against the reference oracle.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::oracle::{materialize_all, oracle_solve};
use crate::solver::{task_flows, BaseCase, SolveConfig, TopologyTask};

/// Deliberate engine defects used to prove that validation catches them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Redistributes outage flows with the wrong sign.
    FlipOutageSign,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Deviation {
    /// `None` for the identity topology.
    pub task: Option<usize>,
    /// `None` for N-0.
    pub contingency: Option<String>,
    pub branch: String,
    pub injection_set: usize,
    pub abs_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    /// Task indices compared besides the identity topology.
    pub sampled: Vec<usize>,
    pub identity_checked: bool,
    pub max_abs_deviation: f64,
    pub worst: Option<Deviation>,
    /// Tasks where solver and oracle disagree on feasibility.
    pub feasibility_mismatches: Vec<String>,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares `samples` randomly drawn tasks plus the identity topology.
pub fn validate_sample(
    base: &BaseCase,
    tasks: &[TopologyTask],
    samples: usize,
    seed: u64,
    tol: f64,
    fault: Option<Fault>,
) -> Result<ValidationReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = sample(&mut rng, tasks.len(), samples.min(tasks.len())).into_vec();
    picked.sort_unstable();
    let identity = TopologyTask::identity(base.grid());
    let mut worst: Option<Deviation> = None;
    let mut mismatches = Vec::new();
    let mut check = |label: Option<usize>, task: &TopologyTask| -> Result<()> {
        let name = label.map_or("identity".to_string(), |i| format!("task {i}"));
        let (dev, mism) = compare(base, task, label, fault)?;
        mismatches.extend(mism.into_iter().map(|m| format!("{name}: {m}")));
        if let Some(d) = dev {
            if worst.as_ref().is_none_or(|w| d.abs_error > w.abs_error) {
                worst = Some(d);
            }
        }
        Ok(())
    };
    check(None, &identity)?;
    for &i in &picked {
        check(Some(i), &tasks[i])?;
    }
    let max = worst.as_ref().map_or(0.0, |w| w.abs_error);
    Ok(ValidationReport {
        sampled: picked,
        identity_checked: true,
        max_abs_deviation: max,
        passed: max <= tol && mismatches.is_empty(),
        worst,
        feasibility_mismatches: mismatches,
        tolerance: tol,
    })
}

/// Worst deviation over all injection sets of one task, plus feasibility
/// disagreements. A task the oracle cannot build must also fail in the
/// solver.
fn compare(base: &BaseCase, task: &TopologyTask, label: Option<usize>, fault: Option<Fault>) -> Result<(Option<Deviation>, Vec<String>)> {
    let grid = base.grid();
    let cfg = SolveConfig::default();
    let topo = match materialize_all(grid, task) {
        Ok(t) => t,
        Err(e) => {
            let solver = task_flows(base, task, 0, &cfg);
            return Ok((None, if solver.is_ok() { vec![format!("oracle rejects topology ({e}), solver accepts it")] } else { vec![] }));
        }
    };
    let oracle = oracle_solve(&topo, grid)?;
    let mut worst: Option<Deviation> = None;
    let mut mism = Vec::new();
    for (k, o) in oracle.iter().enumerate() {
        let f = match task_flows(base, task, k, &cfg) {
            Ok(f) => f,
            Err(e) => {
                mism.push(format!("solver rejects topology the oracle accepts: {e}"));
                continue;
            }
        };
        let mut note = |c: Option<usize>, r: usize, err: f64| {
            if worst.as_ref().is_none_or(|w| err > w.abs_error) {
                worst = Some(Deviation {
                    task: label,
                    contingency: c.map(|c| grid.contingencies()[c].id.clone()),
                    branch: grid.branches()[f.monitored[r]].id.clone(),
                    injection_set: k,
                    abs_error: err,
                });
            }
        };
        for (r, &b) in f.monitored.iter().enumerate() {
            note(None, r, (f.n0[r] - o.n0[b]).abs());
        }
        for (c, (mine, theirs)) in f.n1.iter().zip(&o.n1).enumerate() {
            match (mine, theirs) {
                (Some(m), Some(t)) => {
                    for (r, &b) in f.monitored.iter().enumerate() {
                        let v = match fault {
                            Some(Fault::FlipOutageSign) => 2.0 * f.n0[r] - m[r],
                            None => m[r],
                        };
                        note(Some(c), r, (v - t[b]).abs());
                    }
                }
                (None, None) => {}
                (Some(_), None) => mism.push(format!("{} islands in the oracle only", grid.contingencies()[c].id)),
                (None, Some(_)) => mism.push(format!("{} islands in the solver only", grid.contingencies()[c].id)),
            }
        }
    }
    Ok((worst, mism))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{random_tasks, TaskGenSpec};
    use crate::fixtures::mesh30;

    #[test]
    fn clean_engine_passes_and_fault_is_caught() {
        let g = mesh30();
        let base = BaseCase::new(g.clone()).unwrap();
        let tasks = random_tasks(&g, &TaskGenSpec { tasks: 5, splits: 2, ti: 2, seed: 3 }).unwrap();
        let ok = validate_sample(&base, &tasks, 3, 1, 1e-9, None).unwrap();
        assert!(ok.passed, "{ok:?}");
        let bad = validate_sample(&base, &tasks, 3, 1, 1e-9, Some(Fault::FlipOutageSign)).unwrap();
        assert!(!bad.passed);
        assert!(bad.worst.unwrap().contingency.is_some());
    }

    #[test]
    fn identity_only_is_exact_to_roundoff() {
        let g = mesh30();
        let base = BaseCase::new(g).unwrap();
        let r = validate_sample(&base, &[], 0, 0, 1e-12, None).unwrap();
        assert!(r.passed, "{}", r.max_abs_deviation);
    }
}
