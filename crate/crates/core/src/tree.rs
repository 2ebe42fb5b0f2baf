//! Prefix-tree scheduling of split sequences.
//!
//! Tasks whose canonical split sequences share a prefix share the PTDFs of
//! that prefix: every tree edge is one BSDF update, computed once. A
//! depth-first walk keeps only the PTDFs on the current path alive.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::Result;
use crate::factors::PtdfMatrix;
use crate::solver::kernel::{apply_split, failure, finish_task, solve_flat, with_pool};
use crate::solver::{canonicalize, BaseCase, CanonicalTask, Scheduler, SolveConfig, SolveCounters, SolveResult, SplitAction, TopologyTask};
use crate::grid::Grid;

#[derive(Debug, Clone)]
pub struct TreeNode {
    /// Split applied on the edge from the parent; `None` at the root.
    pub split: Option<SplitAction>,
    pub children: Vec<usize>,
    /// Tasks whose split sequence ends here.
    pub tasks: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SplitTree {
    nodes: Vec<TreeNode>,
    canonical: Vec<Option<CanonicalTask>>,
    rejected: Vec<(usize, String)>,
    depth: usize,
}

impl SplitTree {
    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    /// Number of BSDF updates a full traversal performs.
    pub fn edge_count(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Tasks that failed validation, with the reason.
    pub fn rejected(&self) -> &[(usize, String)] {
        &self.rejected
    }
}

/// BSDF updates the flat scheduler would perform for the same tasks.
pub fn flat_application_count(tasks: &[TopologyTask], grid: &Grid) -> usize {
    tasks
        .iter()
        .filter_map(|t| canonicalize(t, grid).ok())
        .map(|c| c.splits.len())
        .sum()
}

pub fn build_tree(tasks: &[TopologyTask], grid: &Grid) -> SplitTree {
    let mut nodes = vec![TreeNode { split: None, children: Vec::new(), tasks: Vec::new() }];
    let mut index: HashMap<(usize, SplitAction), usize> = HashMap::new();
    let mut canonical = Vec::with_capacity(tasks.len());
    let mut rejected = Vec::new();
    let mut depth = 0;
    for (i, t) in tasks.iter().enumerate() {
        let c = match canonicalize(t, grid) {
            Ok(c) => c,
            Err(e) => {
                rejected.push((i, e.to_string()));
                canonical.push(None);
                continue;
            }
        };
        let mut cur = 0;
        for s in &c.splits {
            cur = match index.get(&(cur, s.clone())) {
                Some(&n) => n,
                None => {
                    let n = nodes.len();
                    nodes.push(TreeNode { split: Some(s.clone()), children: Vec::new(), tasks: Vec::new() });
                    nodes[cur].children.push(n);
                    index.insert((cur, s.clone()), n);
                    n
                }
            };
        }
        depth = depth.max(c.splits.len());
        nodes[cur].tasks.push(i);
        canonical.push(Some(c));
    }
    SplitTree { nodes, canonical, rejected, depth }
}

struct Walk<'a> {
    base: &'a BaseCase,
    tree: &'a SplitTree,
    cfg: &'a SolveConfig,
    out: Vec<(usize, SolveResult)>,
    counters: SolveCounters,
}

impl Walk<'_> {
    fn visit(&mut self, node: usize, ptdf: &PtdfMatrix, live: usize) {
        self.counters.peak_live_ptdfs = self.counters.peak_live_ptdfs.max(live);
        let n = &self.tree.nodes[node];
        for &t in &n.tasks {
            let task = self.tree.canonical[t].as_ref().expect("only valid tasks are attached");
            self.out.push((t, finish_task(self.base, ptdf, task, self.cfg)));
        }
        for &child in &n.children {
            self.descend(child, ptdf, live);
        }
    }

    fn descend(&mut self, child: usize, parent: &PtdfMatrix, live: usize) {
        let split = self.tree.nodes[child].split.as_ref().expect("non-root node has a split");
        match apply_split(self.base, parent, split) {
            Ok(p) => {
                self.counters.bsdf_applications += 1;
                self.visit(child, &p, live + 1);
            }
            Err(e) => {
                let res = failure(e);
                let mut stack = vec![child];
                while let Some(n) = stack.pop() {
                    let node = &self.tree.nodes[n];
                    self.out.extend(node.tasks.iter().map(|&t| (t, res.clone())));
                    stack.extend(&node.children);
                }
            }
        }
    }
}

/// Depth-first execution. With `cfg.parallel_tree` the root's subtrees go
/// to the worker pool, each with its own path of PTDFs.
pub fn execute_tree(base: &BaseCase, tree: &SplitTree, cfg: &SolveConfig) -> Result<(Vec<SolveResult>, SolveCounters)> {
    let mut slots: Vec<Option<SolveResult>> = vec![None; tree.canonical.len()];
    for (i, why) in &tree.rejected {
        slots[*i] = Some(SolveResult::infeasible(Some(why.clone()), Vec::new()));
    }
    let fresh = || Walk {
        base,
        tree,
        cfg,
        out: Vec::new(),
        counters: SolveCounters { bsdf_applications: 0, peak_live_ptdfs: 1 },
    };
    let mut counters = SolveCounters { bsdf_applications: 0, peak_live_ptdfs: 1 };
    let mut outs = Vec::new();
    if cfg.parallel_tree {
        let root = &tree.nodes[0];
        let mut w = fresh();
        for &t in &root.tasks {
            let task = tree.canonical[t].as_ref().expect("only valid tasks are attached");
            w.out.push((t, finish_task(base, &base.ptdf, task, cfg)));
        }
        let walks: Vec<(Vec<(usize, SolveResult)>, SolveCounters)> = with_pool(cfg, || {
            root.children
                .par_iter()
                .map(|&c| {
                    let mut w = fresh();
                    w.descend(c, &base.ptdf, 1);
                    (w.out, w.counters)
                })
                .collect()
        })?;
        outs.push((w.out, w.counters));
        outs.extend(walks);
    } else {
        let mut w = fresh();
        w.visit(0, &base.ptdf, 1);
        outs.push((w.out, w.counters));
    }
    for (out, c) in outs {
        counters.bsdf_applications += c.bsdf_applications;
        counters.peak_live_ptdfs = counters.peak_live_ptdfs.max(c.peak_live_ptdfs);
        for (i, r) in out {
            slots[i] = Some(r);
        }
    }
    let results = slots.into_iter().map(|r| r.expect("every task visited")).collect();
    Ok((results, counters))
}

/// Solves a batch with the configured scheduler and returns the counters.
pub fn solve_batch_counted(base: &BaseCase, tasks: &[TopologyTask], cfg: &SolveConfig) -> Result<(Vec<SolveResult>, SolveCounters)> {
    cfg.validate_for(tasks)?;
    match cfg.scheduler {
        Scheduler::Flat => solve_flat(base, tasks, cfg),
        Scheduler::Tree => execute_tree(base, &build_tree(tasks, &base.grid), cfg),
    }
}
