//! Reference solver: builds every topology explicitly and refactorizes the
//! full susceptance matrix for every contingency. Slow and simple; used as
//! ground truth and as the throughput baseline.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::graph::UnionFind;
use crate::grid::{ContingencyKind, Grid};
use crate::solver::{canonicalize, TopologyTask};

/// A task's topology with splits materialized as real nodes.
#[derive(Debug, Clone)]
pub struct ExplicitTopology {
    pub node_ids: Vec<String>,
    /// `(from, to, susceptance)` per original branch; `None` if disconnected.
    pub branches: Vec<Option<(usize, usize, f64)>>,
    pub slack: usize,
    /// Node of every injection, one vector per injection assignment.
    pub injection_nodes: Vec<Vec<usize>>,
}

impl ExplicitTopology {
    pub fn node_count(&self) -> usize {
        self.node_ids.len()
    }

    /// Converts one injection pattern into a stand-alone grid (no
    /// substations or contingencies). Disconnected branches are dropped.
    pub fn to_grid(&self, source: &Grid, pattern: usize) -> Result<Grid> {
        let mut parts = crate::grid::GridParts {
            node_ids: self.node_ids.clone(),
            slack: self.slack,
            ..Default::default()
        };
        for (b, e) in self.branches.iter().enumerate() {
            if let Some((f, t, _)) = *e {
                let mut br = source.branches()[b].clone();
                br.from = f;
                br.to = t;
                parts.branches.push(br);
            }
        }
        for (i, inj) in source.injections().iter().enumerate() {
            let mut inj = inj.clone();
            inj.node = self.injection_nodes[pattern][i];
            parts.injections.push(inj);
        }
        Grid::new(parts)
    }
}

/// Materializes `task` for one injection assignment.
pub fn materialize(grid: &Grid, task: &TopologyTask, injection: usize) -> Result<ExplicitTopology> {
    let one = TopologyTask {
        injection_sets: vec![task
            .injection_sets
            .get(injection)
            .ok_or_else(|| Error::InvalidTask(format!("injection set index {injection} out of range")))?
            .clone()],
        ..task.clone()
    };
    materialize_all(grid, &one)
}

/// Materializes `task` for every injection assignment. The `k`-th split in
/// canonical order (sorted by substation) becomes node `|V| + k`.
pub fn materialize_all(grid: &Grid, task: &TopologyTask) -> Result<ExplicitTopology> {
    let canon = canonicalize(task, grid)?;
    let n = grid.node_count();
    let mut node_ids = grid.node_ids().to_vec();
    let mut branches: Vec<Option<(usize, usize, f64)>> =
        grid.branches().iter().map(|b| Some((b.from, b.to, b.susceptance))).collect();
    let mut injection_nodes: Vec<Vec<usize>> =
        vec![grid.injections().iter().map(|i| i.node).collect(); canon.injection_sets.len()];

    let mut slot_offset = Vec::new();
    let mut off = 0;
    for s in grid.substations() {
        slot_offset.push(off);
        off += s.injection_elements.len();
    }
    for (k, split) in canon.splits.iter().enumerate() {
        let sub = &grid.substations()[split.substation];
        let a = sub.node;
        let b = n + k;
        node_ids.push(format!("{}#B", grid.node_ids()[a]));
        for (&l, &moved) in sub.branch_elements.iter().zip(&split.branch_assignment) {
            if moved {
                let e = branches[l].as_mut().expect("no disconnections yet");
                if e.0 == a {
                    e.0 = b;
                } else {
                    e.1 = b;
                }
            }
        }
        for (pattern, t_i) in canon.injection_sets.iter().enumerate() {
            for (j, &inj) in sub.injection_elements.iter().enumerate() {
                if t_i[slot_offset[split.substation] + j] {
                    injection_nodes[pattern][inj] = b;
                }
            }
        }
    }
    for &l in &canon.disconnections {
        branches[l] = None;
    }
    let topo = ExplicitTopology { node_ids, branches, slack: grid.slack(), injection_nodes };
    if !connected(&topo, &[]) {
        return Err(Error::DisconnectedTopology("task disconnects the grid at N-0".into()));
    }
    Ok(topo)
}

fn connected(topo: &ExplicitTopology, removed: &[usize]) -> bool {
    let mut uf = UnionFind::new(topo.node_count());
    for (b, e) in topo.branches.iter().enumerate() {
        if let Some((f, t, _)) = e {
            if !removed.contains(&b) {
                uf.union(*f, *t);
            }
        }
    }
    uf.components() == 1
}

/// Flows of one injection pattern, indexed by original branch; removed
/// branches carry 0.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleFlows {
    pub n0: Vec<f64>,
    /// Per grid contingency; `None` if it islands the grid.
    pub n1: Vec<Option<Vec<f64>>>,
}

impl OracleFlows {
    pub fn infeasible(&self) -> Vec<usize> {
        self.n1.iter().enumerate().filter(|(_, c)| c.is_none()).map(|(i, _)| i).collect()
    }
}

/// Solves N-0 and every contingency of `grid` on the explicit topology,
/// one fresh factorization per contingency. Returns one result per
/// injection pattern.
pub fn oracle_solve(topo: &ExplicitTopology, grid: &Grid) -> Result<Vec<OracleFlows>> {
    let patterns = topo.injection_nodes.len();
    let powers: Vec<Vec<f64>> = (0..patterns).map(|p| nodal_power(topo, grid, p, None)).collect();
    let n0 = solve_dc(topo, &[], &powers)?;
    let mut out: Vec<OracleFlows> = n0.into_iter().map(|n0| OracleFlows { n0, n1: Vec::new() }).collect();
    for c in grid.contingencies() {
        let res: Option<Vec<Vec<f64>>> = match c.kind {
            ContingencyKind::Injection => {
                let inj = c.injection.expect("validated injection contingency");
                let powers: Vec<Vec<f64>> =
                    (0..patterns).map(|p| nodal_power(topo, grid, p, Some(inj))).collect();
                Some(solve_dc(topo, &[], &powers)?)
            }
            _ => {
                if connected(topo, &c.branches) {
                    Some(solve_dc(topo, &c.branches, &powers)?)
                } else {
                    None
                }
            }
        };
        match res {
            Some(flows) => {
                for (o, f) in out.iter_mut().zip(flows) {
                    o.n1.push(Some(f));
                }
            }
            None => {
                for o in out.iter_mut() {
                    o.n1.push(None);
                }
            }
        }
    }
    Ok(out)
}

fn nodal_power(topo: &ExplicitTopology, grid: &Grid, pattern: usize, without: Option<usize>) -> Vec<f64> {
    let mut p = vec![0.0; topo.node_count()];
    for (i, inj) in grid.injections().iter().enumerate() {
        if Some(i) != without {
            p[topo.injection_nodes[pattern][i]] += inj.p_mw;
        }
    }
    p
}

/// Branch flows for each nodal power vector with `removed` taken out.
fn solve_dc(topo: &ExplicitTopology, removed: &[usize], powers: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = topo.node_count();
    let slack = topo.slack;
    let red = |v: usize| if v < slack { Some(v) } else if v == slack { None } else { Some(v - 1) };
    let dim = n - 1;
    let mut b = DMatrix::<f64>::zeros(dim, dim);
    let live = |l: usize| if removed.contains(&l) { None } else { topo.branches[l] };
    for l in 0..topo.branches.len() {
        if let Some((f, t, s)) = live(l) {
            let (rf, rt) = (red(f), red(t));
            if let Some(i) = rf {
                b[(i, i)] += s;
            }
            if let Some(j) = rt {
                b[(j, j)] += s;
            }
            if let (Some(i), Some(j)) = (rf, rt) {
                b[(i, j)] -= s;
                b[(j, i)] -= s;
            }
        }
    }
    let mut rhs = DMatrix::<f64>::zeros(dim, powers.len());
    for (c, p) in powers.iter().enumerate() {
        for (v, &pv) in p.iter().enumerate() {
            if let Some(i) = red(v) {
                rhs[(i, c)] = pv;
            }
        }
    }
    let theta = if dim == 0 {
        rhs
    } else {
        b.cholesky()
            .ok_or_else(|| Error::SingularSystem("explicit susceptance matrix is singular".into()))?
            .solve(&rhs)
    };
    let angle = |v: usize, c: usize| red(v).map_or(0.0, |i| theta[(i, c)]);
    Ok((0..powers.len())
        .map(|c| {
            (0..topo.branches.len())
                .map(|l| match live(l) {
                    Some((f, t, s)) => s * (angle(f, c) - angle(t, c)),
                    None => 0.0,
                })
                .collect()
        })
        .collect())
}

/// Solves the unsplit grid directly; shorthand for tests.
pub fn oracle_base(grid: &Grid) -> Result<OracleFlows> {
    let topo = materialize_all(grid, &TopologyTask::identity(grid))?;
    Ok(oracle_solve(&topo, grid)?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Branch, Contingency, GridParts, Injection, Substation};
    use crate::solver::SplitAction;

    fn br(id: &str, f: usize, t: usize) -> Branch {
        Branch { id: id.into(), from: f, to: t, susceptance: 1.0, rating: 100.0, monitored: true }
    }

    fn triangle() -> Grid {
        Grid::new(GridParts {
            node_ids: (0..3).map(|i| i.to_string()).collect(),
            branches: vec![br("e0", 0, 1), br("e1", 1, 2), br("e2", 0, 2)],
            injections: vec![Injection { id: "g".into(), node: 1, p_mw: 90.0 }],
            slack: 0,
            substations: vec![Substation { node: 1, branch_elements: vec![0, 1], injection_elements: vec![0] }],
            contingencies: vec![Contingency { id: "c_e2".into(), kind: ContingencyKind::SingleBranch, branches: vec![2], injection: None }],
        })
        .unwrap()
    }

    #[test]
    fn identity_keeps_grid() {
        let g = triangle();
        let t = materialize(&g, &TopologyTask::identity(&g), 0).unwrap();
        assert_eq!(t.node_count(), 3);
        assert_eq!(t.branches[0], Some((0, 1, 1.0)));
    }

    #[test]
    fn split_rehomes_branch() {
        let g = triangle();
        let task = TopologyTask {
            splits: vec![SplitAction { substation: 0, branch_assignment: vec![true, false] }],
            injection_sets: vec![vec![false]],
            ..Default::default()
        };
        let t = materialize(&g, &task, 0).unwrap();
        assert_eq!(t.node_count(), 4);
        assert_eq!(t.branches[0], Some((0, 3, 1.0)));
        assert_eq!(t.to_grid(&g, 0).unwrap().branches()[0].to, 3);
    }

    #[test]
    fn bridge_disconnection_is_rejected() {
        let mut parts = triangle().into_parts();
        parts.branches.push(br("tail", 2, 3));
        parts.node_ids.push("3".into());
        let g = Grid::new(parts).unwrap();
        let task = TopologyTask { disconnections: vec![3], injection_sets: vec![vec![false]], ..Default::default() };
        assert!(matches!(materialize(&g, &task, 0), Err(Error::DisconnectedTopology(_))));
    }

    #[test]
    fn triangle_flows() {
        let r = oracle_base(&triangle()).unwrap();
        for (a, e) in r.n0.iter().zip([-60.0, 30.0, -30.0]) {
            assert!((a - e).abs() < 1e-12);
        }
        let n1 = r.n1[0].as_ref().unwrap();
        for (a, e) in n1.iter().zip([-90.0, 0.0, 0.0]) {
            assert!((a - e).abs() < 1e-12, "{n1:?}");
        }
    }

    #[test]
    fn bridge_contingency_is_infeasible() {
        let mut parts = triangle().into_parts();
        parts.branches.push(br("tail", 2, 3));
        parts.node_ids.push("3".into());
        parts.contingencies.push(Contingency { id: "c_tail".into(), kind: ContingencyKind::SingleBranch, branches: vec![3], injection: None });
        let g = Grid::new(parts).unwrap();
        assert_eq!(oracle_base(&g).unwrap().infeasible(), vec![1]);
    }
}
