//! Seeded task generation and the throughput harness.

use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::oracle::{materialize, oracle_solve};
use crate::solver::{BaseCase, Mode, Scheduler, SolveConfig, SolveCounters, SolveResult, SplitAction, TopologyTask};
use crate::tree::solve_batch_counted;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TaskGenSpec {
    pub tasks: usize,
    /// Splits per task (capped by the number of substations).
    pub splits: usize,
    /// Injection assignments per task.
    pub ti: usize,
    pub seed: u64,
}

/// Random valid tasks: `splits` distinct substations drawn uniformly,
/// uniform assignment bits with neither busbar left without branches, and
/// no split combination that disconnects the grid at N-0 (rejected and
/// redrawn). Injection assignments are uniform bit vectors.
pub fn random_tasks(grid: &Grid, spec: &TaskGenSpec) -> Result<Vec<TopologyTask>> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let subs = grid.substations();
    let depth = spec.splits.min(subs.len());
    let slots: usize = subs.iter().map(|s| s.injection_elements.len()).sum();
    let mut tasks = Vec::with_capacity(spec.tasks);
    for _ in 0..spec.tasks {
        let mut attempts = 0;
        let task = loop {
            attempts += 1;
            if attempts > 10_000 {
                return Err(Error::InvalidConfig("cannot draw a connected split combination".into()));
            }
            let picked = sample(&mut rng, subs.len(), depth);
            let mut splits = Vec::with_capacity(depth);
            for s in picked.iter() {
                let n = subs[s].branch_elements.len();
                let bits: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
                if bits.iter().all(|&b| b) || bits.iter().all(|&b| !b) {
                    break;
                }
                splits.push(SplitAction { substation: s, branch_assignment: bits });
            }
            if splits.len() != depth {
                continue;
            }
            let t = TopologyTask { splits, disconnections: Vec::new(), injection_sets: vec![vec![false; slots]] };
            if materialize(grid, &t, 0).is_ok() {
                break t;
            }
        };
        let injection_sets = (0..spec.ti.max(1))
            .map(|_| (0..slots).map(|_| rng.random_bool(0.5)).collect())
            .collect();
        tasks.push(TopologyTask { injection_sets, ..task });
    }
    Ok(tasks)
}

/// Loadflows in a solved batch: for each feasible task,
/// `|T_i| × (1 + feasible contingencies)`.
pub fn count_loadflows(grid: &Grid, tasks: &[TopologyTask], results: &[SolveResult]) -> u64 {
    let cases = grid.contingencies().len();
    tasks
        .iter()
        .zip(results)
        .filter(|(_, r)| r.diagnostics.feasible)
        .map(|(t, r)| (t.injection_sets.len() * (1 + cases - r.diagnostics.islanding_contingencies.len())) as u64)
        .sum()
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleTiming {
    pub topologies: usize,
    pub loadflows: u64,
    pub wall_time_s: f64,
    pub loadflows_per_second: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub loadflows_per_second: f64,
    pub wall_time_s: f64,
    pub loadflows: u64,
    pub counting: &'static str,
    pub tasks: usize,
    pub ti: usize,
    pub splits: usize,
    pub seed: u64,
    pub scheduler: Scheduler,
    pub mode: Mode,
    pub workers: Option<usize>,
    pub repeats: usize,
    pub bsdf_applications: usize,
    pub peak_live_ptdfs: usize,
    pub infeasible_tasks: usize,
    pub oracle: Option<OracleTiming>,
    pub speedup_vs_oracle: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Vec<SweepPoint>>,
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub gen: TaskGenSpec,
    pub solve: SolveConfig,
    /// Keep re-running the batch until this much time was spent; the
    /// fastest run is reported.
    pub min_duration: Duration,
    pub min_repeats: usize,
    /// Topologies timed on the oracle; 0 disables the baseline.
    pub oracle_topologies: usize,
}

pub const COUNTING: &str = "tasks x |T_i| x (1 + feasible contingencies)";

/// Timing of one fixed batch: the fastest of the repeated solves.
#[derive(Debug, Clone, Serialize)]
pub struct Throughput {
    pub loadflows: u64,
    pub wall_time_s: f64,
    pub loadflows_per_second: f64,
    pub repeats: usize,
    #[serde(skip)]
    pub results: Vec<SolveResult>,
    #[serde(skip)]
    pub counters: SolveCounters,
}

/// Solves `tasks` repeatedly until both `min_repeats` runs and
/// `min_duration` are reached and keeps the fastest run.
pub fn measure(
    base: &BaseCase,
    tasks: &[TopologyTask],
    solve: &SolveConfig,
    min_duration: Duration,
    min_repeats: usize,
) -> Result<Throughput> {
    let (results, counters) = solve_batch_counted(base, tasks, solve)?;
    let loadflows = count_loadflows(base.grid(), tasks, &results);
    let mut best = f64::INFINITY;
    let mut repeats = 0;
    let started = Instant::now();
    while repeats < min_repeats.max(1) || started.elapsed() < min_duration {
        let t0 = Instant::now();
        let out = solve_batch_counted(base, tasks, solve)?;
        best = best.min(t0.elapsed().as_secs_f64());
        repeats += 1;
        std::hint::black_box(out);
    }
    Ok(Throughput { loadflows, wall_time_s: best, loadflows_per_second: loadflows as f64 / best, repeats, results, counters })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub ti: usize,
    pub loadflows_per_second: f64,
    pub wall_time_s: f64,
    pub loadflows: u64,
}

/// Throughput as a function of `|T_i|` on one fixed set of topologies.
/// Tasks are drawn once with `max(tis)` injection assignments and each
/// point keeps the first `ti` of them, so only the candidate count varies.
/// Every sample solves the same number of candidates (the batch is re-run
/// `max(tis) / ti` times) and points are timed round-robin for `rounds`
/// rounds. Machine speed drifts between rounds, so each point is rated
/// against its predecessor in the same round: the first point reports its
/// median rate, every later one the previous rate times the median ratio.
pub fn ti_sweep(base: &BaseCase, gen: &TaskGenSpec, tis: &[usize], solve: &SolveConfig, rounds: usize) -> Result<Vec<SweepPoint>> {
    let top = tis.iter().copied().max().unwrap_or(1).max(1);
    let full = random_tasks(base.grid(), &TaskGenSpec { ti: top, ..*gen })?;
    let mut points = Vec::with_capacity(tis.len());
    for &ti in tis {
        let ti = ti.clamp(1, top);
        let tasks: Vec<TopologyTask> = full
            .iter()
            .map(|t| TopologyTask { injection_sets: t.injection_sets[..ti].to_vec(), ..t.clone() })
            .collect();
        let (results, _) = solve_batch_counted(base, &tasks, solve)?;
        let runs = top.div_ceil(ti);
        let loadflows = count_loadflows(base.grid(), &tasks, &results) * runs as u64;
        points.push((ti, tasks, runs, loadflows, Vec::new()));
    }
    for _ in 0..rounds.max(1) {
        for (_, tasks, runs, _, times) in points.iter_mut() {
            let t0 = Instant::now();
            for _ in 0..*runs {
                std::hint::black_box(solve_batch_counted(base, tasks, solve)?);
            }
            times.push(t0.elapsed().as_secs_f64());
        }
    }
    let mut out: Vec<SweepPoint> = Vec::with_capacity(points.len());
    let mut prev: Option<(u64, Vec<f64>)> = None;
    for (ti, _, _, loadflows, times) in points {
        let rate = match &prev {
            None => median(times.iter().map(|t| loadflows as f64 / t).collect()),
            Some((plf, ptimes)) => {
                let ratio = median(times.iter().zip(ptimes).map(|(t, pt)| (loadflows as f64 / t) / (*plf as f64 / pt)).collect());
                out.last().map_or(0.0, |p| p.loadflows_per_second) * ratio
            }
        };
        out.push(SweepPoint { ti, loadflows_per_second: rate, wall_time_s: median(times.clone()), loadflows });
        prev = Some((loadflows, times));
    }
    Ok(out)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub fn run_bench(base: &BaseCase, cfg: &BenchConfig) -> Result<BenchReport> {
    let grid = base.grid();
    let tasks = random_tasks(grid, &cfg.gen)?;
    let m = measure(base, &tasks, &cfg.solve, cfg.min_duration, cfg.min_repeats)?;
    let oracle = if cfg.oracle_topologies > 0 {
        Some(time_oracle(grid, &tasks, cfg.oracle_topologies)?)
    } else {
        None
    };
    let rate = m.loadflows_per_second;
    Ok(BenchReport {
        loadflows_per_second: rate,
        wall_time_s: m.wall_time_s,
        loadflows: m.loadflows,
        counting: COUNTING,
        tasks: tasks.len(),
        ti: cfg.gen.ti,
        splits: cfg.gen.splits,
        seed: cfg.gen.seed,
        scheduler: cfg.solve.scheduler,
        mode: cfg.solve.mode,
        workers: cfg.solve.workers,
        repeats: m.repeats,
        bsdf_applications: m.counters.bsdf_applications,
        peak_live_ptdfs: m.counters.peak_live_ptdfs,
        infeasible_tasks: m.results.iter().filter(|r| !r.diagnostics.feasible).count(),
        speedup_vs_oracle: oracle.as_ref().map(|o| rate / o.loadflows_per_second),
        oracle,
        sweep: None,
    })
}

/// Times the oracle on the first injection assignment of the first
/// `topologies` tasks, counting loadflows the same way as the solver.
pub fn time_oracle(grid: &Grid, tasks: &[TopologyTask], topologies: usize) -> Result<OracleTiming> {
    let mut loadflows = 0u64;
    let mut n = 0;
    let t0 = Instant::now();
    for t in tasks.iter().take(topologies) {
        let topo = match materialize(grid, t, 0) {
            Ok(topo) => topo,
            Err(_) => continue,
        };
        let flows = oracle_solve(&topo, grid)?;
        loadflows += (1 + grid.contingencies().len() - flows[0].infeasible().len()) as u64;
        n += 1;
    }
    let wall = t0.elapsed().as_secs_f64();
    Ok(OracleTiming {
        topologies: n,
        loadflows,
        wall_time_s: wall,
        loadflows_per_second: loadflows as f64 / wall,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::mesh30;

    #[test]
    fn generation_is_seeded_and_valid() {
        let g = mesh30();
        let spec = TaskGenSpec { tasks: 20, splits: 3, ti: 4, seed: 7 };
        let a = random_tasks(&g, &spec).unwrap();
        assert_eq!(a, random_tasks(&g, &spec).unwrap());
        for t in &a {
            assert_eq!(t.splits.len(), 3);
            assert_eq!(t.injection_sets.len(), 4);
            assert!(materialize(&g, t, 0).is_ok());
        }
    }
}
