//! Seeded test and benchmark grids.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::grid::matpower::{import_matpower_with, pick_switchable, ContingencyPolicy, ImportOptions};
use crate::grid::{Branch, Contingency, ContingencyKind, Grid, GridParts, Injection, Substation};

/// Triangle `e0 = (0,1)`, `e1 = (1,2)`, `e2 = (0,2)` with unit
/// susceptances, slack 0, a 90 MW generator at node 1, node 1 switchable
/// and one contingency per branch.
pub fn triangle() -> Grid {
    let br = |id: &str, f, t| Branch { id: id.into(), from: f, to: t, susceptance: 1.0, rating: 100.0, monitored: true };
    Grid::new(GridParts {
        node_ids: (0..3).map(|i| i.to_string()).collect(),
        branches: vec![br("e0", 0, 1), br("e1", 1, 2), br("e2", 0, 2)],
        injections: vec![Injection { id: "g1".into(), node: 1, p_mw: 90.0 }],
        slack: 0,
        substations: vec![Substation { node: 1, branch_elements: vec![0, 1], injection_elements: vec![0] }],
        contingencies: (0..3)
            .map(|b| Contingency {
                id: format!("c_e{b}"),
                kind: ContingencyKind::SingleBranch,
                branches: vec![b],
                injection: None,
            })
            .collect(),
    })
    .expect("triangle is valid")
}

#[derive(Debug, Clone, Copy)]
pub struct SyntheticSpec {
    pub nodes: usize,
    /// Branches added on top of a random spanning tree.
    pub extra_branches: usize,
    pub substations: usize,
    /// Multi-branch contingencies (pairs and triples of random branches).
    pub multi_outages: usize,
    pub seed: u64,
}

/// Random meshed grid: a spanning tree plus extra branches, loads on most
/// nodes, generators on some, the most connected nodes switchable. Every
/// non-bridge branch is a contingency, as is every generator; multi-branch
/// contingencies are drawn at random and may island the grid.
pub fn synthetic_grid(spec: &SyntheticSpec) -> Grid {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.nodes.max(2);
    let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (i, rng.random_range(0..i))).collect();
    while edges.len() < n - 1 + spec.extra_branches {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            edges.push((a, b));
        }
    }
    let branches: Vec<Branch> = edges
        .iter()
        .enumerate()
        .map(|(i, &(f, t))| Branch {
            id: format!("br{i}"),
            from: f,
            to: t,
            susceptance: rng.random_range(2.0..20.0),
            rating: rng.random_range(80.0..400.0),
            monitored: true,
        })
        .collect();
    let mut injections = Vec::new();
    for v in 0..n {
        if rng.random_bool(0.7) {
            injections.push(Injection { id: format!("load{v}"), node: v, p_mw: -rng.random_range(10.0..80.0) });
        }
        if rng.random_bool(0.3) {
            injections.push(Injection { id: format!("gen{v}"), node: v, p_mw: rng.random_range(20.0..150.0) });
        }
    }
    let base = Grid::new(GridParts {
        node_ids: (0..n).map(|i| format!("n{i}")).collect(),
        branches,
        injections,
        slack: 0,
        ..Default::default()
    })
    .expect("spanning tree keeps the grid connected");

    let bridges = base.bridge_branches();
    let non_bridge: Vec<usize> = (0..base.branches().len()).filter(|&b| !bridges[b]).collect();
    let mut contingencies: Vec<Contingency> = non_bridge
        .iter()
        .map(|&b| Contingency {
            id: format!("n1_{}", base.branches()[b].id),
            kind: ContingencyKind::SingleBranch,
            branches: vec![b],
            injection: None,
        })
        .collect();
    for k in 0..spec.multi_outages {
        let size = 2 + k % 2;
        let mut set: Vec<usize> = Vec::new();
        while set.len() < size.min(base.branches().len()) {
            let b = rng.random_range(0..base.branches().len());
            if !set.contains(&b) {
                set.push(b);
            }
        }
        contingencies.push(Contingency {
            id: format!("multi{k}"),
            kind: ContingencyKind::MultiBranch,
            branches: set,
            injection: None,
        });
    }
    for (i, inj) in base.injections().iter().enumerate() {
        if inj.p_mw > 0.0 {
            contingencies.push(Contingency {
                id: format!("n1_{}", inj.id),
                kind: ContingencyKind::Injection,
                branches: Vec::new(),
                injection: Some(i),
            });
        }
    }
    let substations = pick_switchable(&base, spec.substations);
    let mut parts = base.into_parts();
    parts.substations = substations;
    parts.contingencies = contingencies;
    Grid::new(parts).expect("synthetic grid is valid")
}

/// A 30-node mesh with eight switchable substations.
pub fn mesh30() -> Grid {
    synthetic_grid(&SyntheticSpec { nodes: 30, extra_branches: 22, substations: 8, multi_outages: 6, seed: 30 })
}

/// A 118-node mesh with twelve switchable substations.
pub fn mesh118() -> Grid {
    synthetic_grid(&SyntheticSpec { nodes: 118, extra_branches: 70, substations: 12, multi_outages: 10, seed: 118 })
}

/// Bundled MATPOWER copy of the IEEE 300-bus case.
pub fn case300_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/case300.m")
}

/// Import settings used for case300: every non-bridge branch and every
/// producing generator is a contingency; the `switchable` best-connected
/// buses can be split.
pub fn case300_options(switchable: usize) -> ImportOptions {
    ImportOptions {
        switchable,
        contingencies: ContingencyPolicy::NonBridge,
        gen_outages: true,
    }
}

pub fn case300() -> Result<Grid> {
    Ok(import_matpower_with(case300_path(), &case300_options(12))?.grid)
}
