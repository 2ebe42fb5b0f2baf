//! Static preprocessing: stub-branch replacement and static-node folding.

use std::collections::BTreeSet;

use super::{Contingency, ContingencyKind, Grid, GridParts, Substation};
use crate::error::Result;

#[derive(Debug, Clone)]
pub struct StubReplacement {
    pub grid: Grid,
    pub removed_branches: Vec<String>,
    pub removed_nodes: Vec<String>,
    pub rehomed_injections: Vec<String>,
    pub dropped_contingencies: Vec<String>,
}

/// Removes bridge branches that lead from a switchable substation into a
/// dead-end subtree without the slack. The whole subtree goes away and its
/// injections move to the substation node, where they become movable
/// injection elements. Flows on all surviving branches are unchanged.
///
/// Contingencies that reference a removed branch are dropped.
pub fn replace_stub_branches(grid: &Grid) -> Result<StubReplacement> {
    let n = grid.node_count();
    let branches = grid.branches();
    let bridges = grid.bridge_branches();
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (b, br) in branches.iter().enumerate() {
        adj[br.from].push((br.to, b));
        adj[br.to].push((br.from, b));
    }
    let sub_nodes: BTreeSet<usize> = grid.substations().iter().map(|s| s.node).collect();

    let mut node_removed = vec![false; n];
    let mut branch_removed = vec![false; branches.len()];
    let mut injection_node: Vec<usize> = grid.injections().iter().map(|i| i.node).collect();
    let mut substations: Vec<Substation> = grid.substations().to_vec();
    let mut rehomed = Vec::new();

    for sub in substations.iter_mut() {
        for b in sub.branch_elements.clone() {
            if !bridges[b] || branch_removed[b] {
                continue;
            }
            let far = branches[b].far_end(sub.node).expect("validated incidence");
            // Collect the far side without crossing the bridge.
            let mut side = vec![far];
            let mut seen = vec![false; n];
            seen[far] = true;
            let mut i = 0;
            while i < side.len() {
                let v = side[i];
                i += 1;
                for &(w, e) in &adj[v] {
                    if e != b && !seen[w] {
                        seen[w] = true;
                        side.push(w);
                    }
                }
            }
            if side
                .iter()
                .any(|&v| v == grid.slack() || sub_nodes.contains(&v) || node_removed[v])
            {
                continue;
            }
            branch_removed[b] = true;
            for &v in &side {
                node_removed[v] = true;
                for &(_, e) in &adj[v] {
                    branch_removed[e] = true;
                }
            }
            for (k, node) in injection_node.iter_mut().enumerate() {
                if seen[*node] {
                    *node = sub.node;
                    sub.injection_elements.push(k);
                    rehomed.push(grid.injections()[k].id.clone());
                }
            }
        }
    }

    let mut node_map = vec![usize::MAX; n];
    let mut node_ids = Vec::new();
    let mut removed_nodes = Vec::new();
    for v in 0..n {
        if node_removed[v] {
            removed_nodes.push(grid.node_ids()[v].clone());
        } else {
            node_map[v] = node_ids.len();
            node_ids.push(grid.node_ids()[v].clone());
        }
    }
    let mut branch_map = vec![usize::MAX; branches.len()];
    let mut new_branches = Vec::new();
    let mut removed_branches = Vec::new();
    for (b, br) in branches.iter().enumerate() {
        if branch_removed[b] {
            removed_branches.push(br.id.clone());
            continue;
        }
        branch_map[b] = new_branches.len();
        let mut br = br.clone();
        br.from = node_map[br.from];
        br.to = node_map[br.to];
        new_branches.push(br);
    }
    let injections = grid
        .injections()
        .iter()
        .zip(&injection_node)
        .map(|(inj, &node)| {
            let mut inj = inj.clone();
            inj.node = node_map[node];
            inj
        })
        .collect();
    let substations = substations
        .into_iter()
        .map(|s| Substation {
            node: node_map[s.node],
            branch_elements: s
                .branch_elements
                .iter()
                .filter(|&&b| !branch_removed[b])
                .map(|&b| branch_map[b])
                .collect(),
            injection_elements: s.injection_elements,
        })
        .collect();
    let mut contingencies = Vec::new();
    let mut dropped = Vec::new();
    for c in grid.contingencies() {
        if c.branches.iter().any(|&b| branch_removed[b]) {
            dropped.push(c.id.clone());
            continue;
        }
        contingencies.push(Contingency {
            branches: c.branches.iter().map(|&b| branch_map[b]).collect(),
            ..c.clone()
        });
    }

    let grid = Grid::new(GridParts {
        node_ids,
        branches: new_branches,
        injections,
        slack: node_map[grid.slack()],
        substations,
        contingencies,
    })?;
    Ok(StubReplacement {
        grid,
        removed_branches,
        removed_nodes,
        rehomed_injections: rehomed,
        dropped_contingencies: dropped,
    })
}

/// Partition of the nodes into those whose PTDF column the solver needs
/// and the static remainder, whose nodal power never changes and can be
/// folded into a single precomputed flow column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StaticFold {
    pub static_nodes: Vec<usize>,
    pub effective_nodes: Vec<usize>,
    /// Injections whose node can change (substation injection elements).
    pub movable_injections: Vec<usize>,
}

/// Computes which nodes must keep a PTDF column.
///
/// Kept: the slack, substation nodes, far ends of substation branches
/// (needed by the split update), endpoints of contingency branches and of
/// `extra_branches` (remedial disconnection candidates), and nodes hosting
/// movable or outage-listed injections. Everything else is static.
pub fn static_injection_fold(grid: &Grid, extra_branches: &[usize]) -> StaticFold {
    let mut keep = BTreeSet::new();
    keep.insert(grid.slack());
    let branches = grid.branches();
    let mut movable = BTreeSet::new();
    for sub in grid.substations() {
        keep.insert(sub.node);
        for &b in &sub.branch_elements {
            keep.insert(branches[b].from);
            keep.insert(branches[b].to);
        }
        for &i in &sub.injection_elements {
            movable.insert(i);
            keep.insert(grid.injections()[i].node);
        }
    }
    for c in grid.contingencies() {
        for &b in &c.branches {
            keep.insert(branches[b].from);
            keep.insert(branches[b].to);
        }
        if c.kind == ContingencyKind::Injection {
            if let Some(i) = c.injection {
                keep.insert(grid.injections()[i].node);
            }
        }
    }
    for &b in extra_branches {
        if let Some(br) = branches.get(b) {
            keep.insert(br.from);
            keep.insert(br.to);
        }
    }
    let static_nodes = (0..grid.node_count()).filter(|v| !keep.contains(v)).collect();
    StaticFold {
        static_nodes,
        effective_nodes: keep.into_iter().collect(),
        movable_injections: movable.into_iter().collect(),
    }
}
