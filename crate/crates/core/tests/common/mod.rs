#![allow(dead_code)]

use batchdc::oracle::{materialize_all, oracle_solve};
use batchdc::solver::{agg_m, task_flows, BaseCase, IslandingPolicy, SolveConfig, TopologyTask};
use batchdc::Grid;

/// Largest deviation between solver and oracle over all injection
/// patterns, N-0 and every feasible contingency. Panics if the infeasible
/// sets differ.
pub fn max_deviation(base: &BaseCase, task: &TopologyTask) -> f64 {
    let grid = base.grid();
    let cfg = SolveConfig::default();
    let topo = materialize_all(grid, task).unwrap();
    let oracle = oracle_solve(&topo, grid).unwrap();
    let mut dev = 0.0f64;
    for (k, o) in oracle.iter().enumerate() {
        let f = task_flows(base, task, k, &cfg).unwrap();
        for (r, &b) in f.monitored.iter().enumerate() {
            dev = dev.max((f.n0[r] - o.n0[b]).abs());
        }
        assert_eq!(f.n1.len(), o.n1.len());
        for (c, (mine, theirs)) in f.n1.iter().zip(&o.n1).enumerate() {
            match (mine, theirs) {
                (Some(m), Some(t)) => {
                    for (r, &b) in f.monitored.iter().enumerate() {
                        dev = dev.max((m[r] - t[b]).abs());
                    }
                }
                (None, None) => {}
                _ => panic!("contingency {c}: feasibility differs"),
            }
        }
    }
    dev
}

/// Metric of every injection pattern computed from oracle flows.
pub fn oracle_metrics(grid: &Grid, task: &TopologyTask, policy: IslandingPolicy, penalty: f64) -> Vec<f64> {
    let topo = materialize_all(grid, task).unwrap();
    let ratings: Vec<f64> = grid.monitored().iter().map(|&b| grid.branches()[b].rating).collect();
    let pick = |f: &[f64]| grid.monitored().iter().map(|&b| f[b]).collect::<Vec<f64>>();
    oracle_solve(&topo, grid)
        .unwrap()
        .iter()
        .map(|o| {
            let n1: Vec<Option<Vec<f64>>> = o.n1.iter().map(|c| c.as_deref().map(pick)).collect();
            agg_m(&pick(&o.n0), &n1, &ratings, policy, penalty)
        })
        .collect()
}

/// Lowest index attaining the minimum.
pub fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x < v[best] {
            best = i;
        }
    }
    best
}

/// Every injection pattern over the injection slots of the split
/// substations (other slots stay false), capped at `limit`.
pub fn exhaustive_injections(grid: &Grid, task: &TopologyTask, limit: usize) -> Vec<Vec<bool>> {
    let mut offsets = Vec::new();
    let mut off = 0;
    for s in grid.substations() {
        offsets.push(off);
        off += s.injection_elements.len();
    }
    let mut free = Vec::new();
    for s in &task.splits {
        let n = grid.substations()[s.substation].injection_elements.len();
        free.extend(offsets[s.substation]..offsets[s.substation] + n);
    }
    let count = 1usize.checked_shl(free.len() as u32).unwrap_or(usize::MAX).min(limit);
    (0..count)
        .map(|m| {
            let mut v = vec![false; off];
            for (bit, &slot) in free.iter().enumerate() {
                v[slot] = (m >> bit) & 1 == 1;
            }
            v
        })
        .collect()
}
