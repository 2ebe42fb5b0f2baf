//! Branch stage and injection stage.

use std::borrow::Cow;

use rayon::prelude::*;

use super::base::BaseCase;
use super::report::{max_relative, scan_max, ReportBuilder};
use super::task::{canonicalize, CanonicalTask, SplitAction, TopologyTask};
use super::{Diagnostics, IslandingPolicy, Mode, MultiOutageMethod, SolveConfig, SolveCounters, SolveResult};
use crate::error::{Error, Result};
use crate::factors::{
    apply_bsdf, apply_modf_to_ptdf, apply_outage_to_ptdf, compute_bsdf, compute_modf, lodf_column, n0_flows,
    PtdfMatrix, ISLANDING_TOL,
};
use crate::grid::ContingencyKind;

/// PTDF after a task's splits, plus the number of BSDF updates applied.
#[derive(Debug, Clone)]
pub struct SplitChain {
    pub ptdf: PtdfMatrix,
    pub applied: usize,
}

pub(crate) fn apply_split(base: &BaseCase, parent: &PtdfMatrix, split: &SplitAction) -> Result<PtdfMatrix> {
    let upd = compute_bsdf(parent, &base.grid, split.substation, &split.branch_assignment)?;
    Ok(apply_bsdf(parent, &upd))
}

/// Applies a canonical split sequence to the base PTDF.
pub(crate) fn split_chain(base: &BaseCase, splits: &[SplitAction]) -> std::result::Result<SplitChain, (Error, usize)> {
    let mut cur: Option<PtdfMatrix> = None;
    for (i, s) in splits.iter().enumerate() {
        let parent = cur.as_ref().unwrap_or(&base.ptdf);
        cur = Some(apply_split(base, parent, s).map_err(|e| (e, i))?);
    }
    Ok(SplitChain {
        ptdf: cur.unwrap_or_else(|| base.ptdf.clone()),
        applied: splits.len(),
    })
}

/// Outage handling of one contingency under a fixed topology.
#[derive(Debug, Clone)]
enum CaseKernel {
    /// `p + l · p[row]` over monitored rows.
    Single { row: usize, lodf: Vec<f64> },
    /// `p + sum_j m_j · p[row_j]` over monitored rows.
    Modf { rows: Vec<usize>, cols: Vec<Vec<f64>> },
    /// Successive single outages; columns span all rows.
    Sequential { steps: Vec<(usize, Vec<f64>)> },
    /// `p - setpoint · PTDF[:, node]`; the column depends on the busbar the
    /// injection sits on when its substation is split.
    Injection { setpoint: f64, home: Vec<f64>, moved: Option<(usize, Vec<f64>)> },
    Islanded,
}

/// One active split as seen by the injection loop.
#[derive(Debug, Clone)]
struct SplitDelta {
    /// Injection slot range of the substation.
    slots: std::ops::Range<usize>,
    /// `PTDF[:, B] - PTDF[:, A]` over all rows.
    diff: Vec<f64>,
}

/// Everything the injection loop needs for one topology.
#[derive(Debug, Clone)]
pub struct BranchContext<'a> {
    pub ptdf: Cow<'a, PtdfMatrix>,
    /// N-0 flows of the unmoved injections over all rows.
    pub static_flows: Vec<f64>,
    splits: Vec<SplitDelta>,
    cases: Vec<CaseKernel>,
    /// Monitored rows that are not reported (disconnected branches).
    skip: Vec<bool>,
    islanding: Vec<usize>,
}

impl BranchContext<'_> {
    /// Indices of contingencies that island the grid.
    pub fn islanding_contingencies(&self) -> &[usize] {
        &self.islanding
    }
}

/// Splits, disconnections and outage factors for one task.
pub fn branch_stage<'a>(base: &'a BaseCase, task: &CanonicalTask, cfg: &SolveConfig) -> Result<BranchContext<'a>> {
    let chain = split_chain(base, &task.splits).map_err(|(e, _)| e)?;
    let BranchContext { ptdf, static_flows, splits, cases, skip, islanding } =
        finish_branch_stage(base, &chain.ptdf, task, cfg)?;
    let owned = match ptdf {
        Cow::Owned(p) => Some(p),
        Cow::Borrowed(_) => None,
    };
    let ptdf = Cow::Owned(owned.unwrap_or(chain.ptdf));
    Ok(BranchContext { ptdf, static_flows, splits, cases, skip, islanding })
}

/// The part of the branch stage that follows the splits: disconnections,
/// contingency factors and static flows.
pub fn finish_branch_stage<'a>(
    base: &BaseCase,
    split_ptdf: &'a PtdfMatrix,
    task: &CanonicalTask,
    cfg: &SolveConfig,
) -> Result<BranchContext<'a>> {
    let grid = &base.grid;
    let ptdf: Cow<'a, PtdfMatrix> = if task.disconnections.is_empty() {
        Cow::Borrowed(split_ptdf)
    } else {
        let disc = &task.disconnections;
        let ids = || disc.iter().map(|&b| grid.branches()[b].id.clone()).collect::<Vec<_>>();
        let islands = |e: Error| match e {
            Error::Islanding { .. } => Error::Islanding { branches: ids() },
            other => other,
        };
        Cow::Owned(match cfg.multi_outage_method {
            MultiOutageMethod::Modf => {
                let m = compute_modf(split_ptdf, disc).map_err(islands)?;
                apply_modf_to_ptdf(split_ptdf, &m)
            }
            MultiOutageMethod::SequentialLodf => {
                let mut cur = split_ptdf.clone();
                for &k in disc {
                    let col = lodf_column(&cur, k).map_err(islands)?;
                    cur = apply_outage_to_ptdf(&cur, &col, k)?;
                }
                cur
            }
        })
    };
    let mon = ptdf.monitored_rows();

    let mut skip = vec![false; mon];
    for &b in &task.disconnections {
        if let Some(r) = ptdf.branch_row(b).filter(|&r| r < mon) {
            skip[r] = true;
        }
    }

    // Active splits in canonical order own nodes base_nodes + k.
    let mut splits = Vec::with_capacity(task.splits.len());
    let mut moved_slot: Vec<Option<(usize, usize)>> = vec![None; grid.injections().len()];
    for (k, s) in task.splits.iter().enumerate() {
        let sub = &grid.substations()[s.substation];
        let col_a = ptdf.node_column(sub.node).expect("substation columns are kept");
        let col_b = ptdf.node_column(ptdf.base_nodes() + k).expect("split column exists");
        let off = base.slot_offset[s.substation];
        for (j, &inj) in sub.injection_elements.iter().enumerate() {
            moved_slot[inj] = Some((off + j, base.ptdf.base_nodes() + k));
        }
        splits.push(SplitDelta {
            slots: off..off + sub.injection_elements.len(),
            diff: col_b.iter().zip(col_a).map(|(b, a)| b - a).collect(),
        });
    }

    let mut cases = Vec::with_capacity(grid.contingencies().len());
    let mut islanding = Vec::new();
    for (c, cont) in grid.contingencies().iter().enumerate() {
        let kernel = match cont.kind {
            ContingencyKind::Injection => {
                let inj = cont.injection.expect("validated injection contingency");
                let node = grid.injections()[inj].node;
                let col = |n: usize| {
                    ptdf.node_column(n)
                        .map(|c| c[..mon].to_vec())
                        .ok_or_else(|| Error::InvalidReduction(format!("injection node {n} was folded")))
                };
                CaseKernel::Injection {
                    setpoint: grid.injections()[inj].p_mw,
                    home: col(node)?,
                    moved: match moved_slot[inj] {
                        Some((slot, b)) => Some((slot, col(b)?)),
                        None => None,
                    },
                }
            }
            _ if cont.branches.len() == 1 => match lodf_column(&ptdf, cont.branches[0]) {
                Ok(mut l) => {
                    let row = ptdf.branch_row(cont.branches[0]).expect("contingency rows are kept");
                    l.truncate(mon);
                    CaseKernel::Single { row, lodf: l }
                }
                Err(Error::Islanding { .. }) => CaseKernel::Islanded,
                Err(e) => return Err(e),
            },
            _ => match cfg.multi_outage_method {
                MultiOutageMethod::Modf => match compute_modf(&ptdf, &cont.branches) {
                    Ok(m) => CaseKernel::Modf {
                        rows: m.outage_rows().to_vec(),
                        cols: (0..m.outages().len()).map(|j| m.column(j)[..mon].to_vec()).collect(),
                    },
                    Err(Error::Islanding { .. }) => CaseKernel::Islanded,
                    Err(e) => return Err(e),
                },
                MultiOutageMethod::SequentialLodf => match sequential_lodf(&ptdf, &cont.branches) {
                    Ok(steps) => CaseKernel::Sequential { steps },
                    Err(Error::Islanding { .. }) => CaseKernel::Islanded,
                    Err(e) => return Err(e),
                },
            },
        };
        if matches!(kernel, CaseKernel::Islanded) {
            islanding.push(c);
        }
        cases.push(kernel);
    }

    let static_flows = n0_flows(&ptdf, &ptdf.nodal_vector(&grid.nodal_power()));
    Ok(BranchContext { ptdf, static_flows, splits, cases, skip, islanding })
}

/// LODF columns for outaging `outages` one after another, each expressed
/// on the grid with the previous ones already removed.
fn sequential_lodf(ptdf: &PtdfMatrix, outages: &[usize]) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut rows = Vec::with_capacity(outages.len());
    let mut transfer = Vec::with_capacity(outages.len());
    for &k in outages {
        let (row, cf, ct) = ptdf.outage_handles(k)?;
        rows.push(row);
        transfer.push(ptdf.transfer_column(cf, ct));
    }
    let mut steps = Vec::with_capacity(outages.len());
    for j in 0..outages.len() {
        let row = rows[j];
        let mut l = std::mem::take(&mut transfer[j]);
        let den = 1.0 - l[row];
        if den.abs() < ISLANDING_TOL {
            return Err(Error::Islanding { branches: vec![ptdf.branch_id(outages[j]).to_string()] });
        }
        for v in l.iter_mut() {
            *v /= den;
        }
        l[row] = -1.0;
        for t in transfer.iter_mut().skip(j + 1) {
            let w = t[row];
            if w != 0.0 {
                crate::factors::axpy(w, &l, t);
            }
            t[row] = 0.0;
        }
        steps.push((row, l));
    }
    Ok(steps)
}

/// Receives the flow vectors of one evaluation and returns the largest
/// relative load of each.
trait Sink {
    fn n0(&mut self, flows: &[f64]) -> f64;
    /// Rows `0..n` of one post-outage flow vector, given element-wise.
    fn case(&mut self, case: usize, n: usize, flow: impl Fn(usize) -> f64) -> f64;
    fn islanded(&mut self, _case: usize) {}
}

struct MetricSink<'r> {
    ratings: &'r [f64],
    inv: &'r [f64],
}

impl Sink for MetricSink<'_> {
    #[inline]
    fn n0(&mut self, flows: &[f64]) -> f64 {
        scan_max(flows.len(), |r| flows[r], self.ratings, self.inv)
    }
    #[inline]
    fn case(&mut self, _: usize, n: usize, flow: impl Fn(usize) -> f64) -> f64 {
        scan_max(n, flow, self.ratings, self.inv)
    }
}

struct ReportSink<'r> {
    builder: &'r mut ReportBuilder,
    ratings: &'r [f64],
    inv: &'r [f64],
    rows: &'r [usize],
    skip: &'r [bool],
}

impl Sink for ReportSink<'_> {
    #[inline]
    fn n0(&mut self, flows: &[f64]) -> f64 {
        self.builder.scan_n0(flows, self.ratings, self.inv, self.rows, self.skip)
    }
    #[inline]
    fn case(&mut self, case: usize, n: usize, flow: impl Fn(usize) -> f64) -> f64 {
        self.builder.scan_case(case, n, flow, self.ratings, self.inv, self.rows, self.skip)
    }
}

struct Collector<'r> {
    ratings: &'r [f64],
    n0: Vec<f64>,
    n1: Vec<Option<Vec<f64>>>,
}

impl Sink for Collector<'_> {
    fn n0(&mut self, flows: &[f64]) -> f64 {
        self.n0 = flows.to_vec();
        max_relative(flows, self.ratings)
    }
    fn case(&mut self, _: usize, n: usize, flow: impl Fn(usize) -> f64) -> f64 {
        let v: Vec<f64> = (0..n).map(flow).collect();
        let m = max_relative(&v, self.ratings);
        self.n1.push(Some(v));
        m
    }
    fn islanded(&mut self, _: usize) {
        self.n1.push(None);
    }
}

/// Reusable buffers of the injection loop.
struct Scratch {
    flows: Vec<f64>,
    n1: Vec<f64>,
}

/// N-0 and N-1 for one injection assignment. Returns the metric; the sink
/// sees every flow vector (monitored rows only).
fn evaluate<S: Sink>(ctx: &BranchContext, base: &BaseCase, t_i: &[bool], penalty: f64, buf: &mut Scratch, sink: &mut S) -> f64 {
    let mon = ctx.ptdf.monitored_rows();

    let flows = &mut buf.flows;
    flows.clear();
    flows.extend_from_slice(&ctx.static_flows);
    for s in &ctx.splits {
        let mut moved = 0.0;
        for k in s.slots.clone() {
            if t_i[k] {
                moved += base.slot_power[k];
            }
        }
        if moved != 0.0 {
            crate::factors::axpy(moved, &s.diff, flows);
        }
    }
    let flows = &buf.flows;
    let mut metric = sink.n0(&flows[..mon]);

    let n1 = &mut buf.n1;
    for (c, case) in ctx.cases.iter().enumerate() {
        let m = match case {
            CaseKernel::Single { row, lodf } => {
                let pk = flows[*row];
                let (base_flows, lodf) = (&flows[..mon], &lodf[..mon]);
                sink.case(c, mon, |r| base_flows[r] + lodf[r] * pk)
            }
            CaseKernel::Modf { rows, cols } => {
                n1.clear();
                n1.extend_from_slice(&flows[..mon]);
                for (r, col) in rows.iter().zip(cols) {
                    let pk = flows[*r];
                    if pk != 0.0 {
                        crate::factors::axpy(pk, col, n1);
                    }
                }
                for r in rows.iter().filter(|&&r| r < mon) {
                    n1[*r] = 0.0;
                }
                sink.case(c, mon, |r| n1[r])
            }
            CaseKernel::Sequential { steps } => {
                n1.clear();
                n1.extend_from_slice(flows);
                for (r, l) in steps {
                    let pk = n1[*r];
                    if pk != 0.0 {
                        crate::factors::axpy(pk, l, n1);
                    }
                    n1[*r] = 0.0;
                }
                sink.case(c, mon, |r| n1[r])
            }
            CaseKernel::Injection { setpoint, home, moved } => {
                let col = match moved {
                    Some((slot, col_b)) if t_i[*slot] => col_b,
                    _ => home,
                };
                let (base_flows, col) = (&flows[..mon], &col[..mon]);
                sink.case(c, mon, |r| base_flows[r] - setpoint * col[r])
            }
            CaseKernel::Islanded => {
                sink.islanded(c);
                penalty
            }
        };
        if m > metric {
            metric = m;
        }
    }
    metric
}

/// Injection bruteforce over the task's assignment set.
pub fn injection_stage(ctx: &BranchContext, base: &BaseCase, task: &CanonicalTask, cfg: &SolveConfig) -> SolveResult {
    let grid = &base.grid;
    let islanding_ids: Vec<String> = ctx.islanding.iter().map(|&c| grid.contingencies()[c].id.clone()).collect();
    if cfg.islanding_policy == IslandingPolicy::Error && !ctx.islanding.is_empty() {
        return SolveResult::infeasible(Some("contingencies island the grid".into()), islanding_ids);
    }
    let mon = ctx.ptdf.monitored_rows();
    let rows = &ctx.ptdf.row_branches()[..mon];
    let mut buf = Scratch {
        flows: Vec::with_capacity(ctx.static_flows.len()),
        n1: Vec::with_capacity(ctx.static_flows.len()),
    };
    let penalty = cfg.penalty;

    let (best, metric, mut builder) = match cfg.mode {
        Mode::OutputFirst | Mode::Symmetric => {
            let mut best_b = ReportBuilder::new(cfg);
            let mut cur_b = ReportBuilder::new(cfg);
            let mut best: Option<(usize, f64)> = None;
            for (k, t_i) in task.injection_sets.iter().enumerate() {
                cur_b.reset();
                let mut sink = ReportSink { builder: &mut cur_b, ratings: &base.ratings, inv: &base.inv_ratings, rows, skip: &ctx.skip };
                let m = evaluate(ctx, base, t_i, penalty, &mut buf, &mut sink);
                if best.is_none_or(|(_, bm)| m < bm) {
                    best = Some((k, m));
                    std::mem::swap(&mut best_b, &mut cur_b);
                }
            }
            let (k, m) = best.expect("injection set is non-empty");
            (k, m, best_b)
        }
        Mode::MetricFirst => {
            let mut best: Option<(usize, f64)> = None;
            for (k, t_i) in task.injection_sets.iter().enumerate() {
                let m = evaluate(ctx, base, t_i, penalty, &mut buf, &mut MetricSink { ratings: &base.ratings, inv: &base.inv_ratings });
                if best.is_none_or(|(_, bm)| m < bm) {
                    best = Some((k, m));
                }
            }
            let (k, m) = best.expect("injection set is non-empty");
            let mut b = ReportBuilder::new(cfg);
            let mut sink = ReportSink { builder: &mut b, ratings: &base.ratings, inv: &base.inv_ratings, rows, skip: &ctx.skip };
            let again = evaluate(ctx, base, &task.injection_sets[k], penalty, &mut buf, &mut sink);
            debug_assert_eq!(again.to_bits(), m.to_bits());
            (k, m, b)
        }
    };
    let report = builder.finish(
        |b| grid.branches()[b].id.clone(),
        |c| grid.contingencies()[c].id.clone(),
    );
    SolveResult {
        metric,
        best_injection: Some(best),
        report,
        diagnostics: Diagnostics { feasible: true, error: None, islanding_contingencies: islanding_ids },
    }
}

pub(crate) fn failure(e: Error) -> SolveResult {
    SolveResult::infeasible(Some(e.to_string()), Vec::new())
}

/// Solves one task on the flat path; also returns the BSDF updates applied
/// and the number of split PTDFs that were alive at once (base included).
pub(crate) fn solve_task_counted(base: &BaseCase, task: &TopologyTask, cfg: &SolveConfig) -> (SolveResult, usize, usize) {
    let canon = match canonicalize(task, &base.grid) {
        Ok(c) => c,
        Err(e) => return (failure(e), 0, 1),
    };
    let chain = match split_chain(base, &canon.splits) {
        Ok(c) => c,
        Err((e, applied)) => return (failure(e), applied, applied + 1),
    };
    let live = chain.applied + 1;
    let res = finish_task(base, &chain.ptdf, &canon, cfg);
    (res, chain.applied, live)
}

/// Disconnections and injection stage from a split PTDF.
pub(crate) fn finish_task(base: &BaseCase, split_ptdf: &PtdfMatrix, task: &CanonicalTask, cfg: &SolveConfig) -> SolveResult {
    match finish_branch_stage(base, split_ptdf, task, cfg) {
        Ok(ctx) => injection_stage(&ctx, base, task, cfg),
        Err(e) => failure(e),
    }
}

pub fn solve_task(base: &BaseCase, task: &TopologyTask, cfg: &SolveConfig) -> SolveResult {
    solve_task_counted(base, task, cfg).0
}

/// Runs `f` on a pool with `cfg.workers` threads, or the global pool.
pub(crate) fn with_pool<T: Send>(cfg: &SolveConfig, f: impl FnOnce() -> T + Send) -> Result<T> {
    match cfg.workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Flat scheduler with counters.
pub(crate) fn solve_flat(base: &BaseCase, tasks: &[TopologyTask], cfg: &SolveConfig) -> Result<(Vec<SolveResult>, SolveCounters)> {
    let out: Vec<(SolveResult, usize, usize)> = with_pool(cfg, || {
        let mut out = Vec::with_capacity(tasks.len());
        for wave in tasks.chunks(cfg.max_batch) {
            out.par_extend(wave.par_iter().map(|t| solve_task_counted(base, t, cfg)));
        }
        out
    })?;
    let mut counters = SolveCounters { bsdf_applications: 0, peak_live_ptdfs: 1 };
    let results = out
        .into_iter()
        .map(|(r, applied, live)| {
            counters.bsdf_applications += applied;
            counters.peak_live_ptdfs = counters.peak_live_ptdfs.max(live);
            r
        })
        .collect();
    Ok((results, counters))
}

/// Solves a batch; one result per task, in task order. Only an invalid
/// config fails the whole batch.
pub fn solve_batch(base: &BaseCase, tasks: &[TopologyTask], cfg: &SolveConfig) -> Result<Vec<SolveResult>> {
    Ok(crate::tree::solve_batch_counted(base, tasks, cfg)?.0)
}

/// Monitored-row flows of one injection candidate, computed by the same
/// kernels the solver uses.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskFlows {
    /// Branch index of every entry.
    pub monitored: Vec<usize>,
    pub n0: Vec<f64>,
    /// Per contingency in grid order; `None` if it islands the grid.
    pub n1: Vec<Option<Vec<f64>>>,
    pub metric: f64,
}

pub fn task_flows(base: &BaseCase, task: &TopologyTask, injection: usize, cfg: &SolveConfig) -> Result<TaskFlows> {
    let canon = canonicalize(task, &base.grid)?;
    let t_i = canon
        .injection_sets
        .get(injection)
        .ok_or_else(|| Error::InvalidTask(format!("injection set index {injection} out of range")))?
        .clone();
    let ctx = branch_stage(base, &canon, cfg)?;
    let mut buf = Scratch { flows: Vec::new(), n1: Vec::new() };
    let mut sink = Collector { ratings: &base.ratings, n0: Vec::new(), n1: Vec::new() };
    let penalty = match cfg.islanding_policy {
        IslandingPolicy::Penalize => cfg.penalty,
        IslandingPolicy::Error => f64::INFINITY,
    };
    let metric = evaluate(&ctx, base, &t_i, penalty, &mut buf, &mut sink);
    Ok(TaskFlows {
        monitored: ctx.ptdf.row_branches()[..ctx.ptdf.monitored_rows()].to_vec(),
        n0: sink.n0,
        n1: sink.n1,
        metric,
    })
}
