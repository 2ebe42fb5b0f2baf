//! Metric and sparse worst-case report.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{IslandingPolicy, SolveConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct N0Entry {
    pub branch: String,
    pub flow_mw: f64,
    pub relative_load: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct N1Entry {
    pub contingency: String,
    pub branch: String,
    pub flow_mw: f64,
    pub relative_load: f64,
}

/// Worst branch results, sorted by relative load descending, ties by case
/// index then branch index.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SparseReport {
    pub n0_worst: Vec<N0Entry>,
    pub n1_worst: Vec<N1Entry>,
}

#[inline]
pub(crate) fn relative_load(flow: f64, rating: f64) -> f64 {
    flow.abs() / rating
}

/// Largest relative load of one flow vector over monitored rows.
#[inline]
pub(crate) fn max_relative(flows: &[f64], ratings: &[f64]) -> f64 {
    let mut m = 0.0f64;
    for (f, r) in flows.iter().zip(ratings) {
        let v = relative_load(*f, *r);
        if v > m {
            m = v;
        }
    }
    m
}

/// Relative slack of the division-free prefilter. `|f| * (1 / r)` is within
/// a few ulps of `|f| / r`, so a row whose product falls below
/// `threshold * (1 - SLACK)` cannot reach `threshold`.
const SLACK: f64 = 1e-12;

/// `max_relative` over rows `0..n` given by `flow`, bit-identical to it but
/// dividing only for rows that can raise the maximum.
#[inline(always)]
pub(crate) fn scan_max(n: usize, flow: impl Fn(usize) -> f64, ratings: &[f64], inv: &[f64]) -> f64 {
    let (ratings, inv) = (&ratings[..n], &inv[..n]);
    let mut m = 0.0f64;
    let mut lo = 0.0f64;
    for r in 0..n {
        let a = flow(r).abs();
        if a * inv[r] >= lo {
            let v = a / ratings[r];
            if v > m {
                m = v;
                lo = m * (1.0 - SLACK);
            }
        }
    }
    m
}

/// Like [`scan_max`], additionally offering every reported row to `top`.
#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn scan_top(
    top: &mut TopK,
    case: usize,
    n: usize,
    flow: impl Fn(usize) -> f64,
    ratings: &[f64],
    inv: &[f64],
    rows: &[usize],
    skip: &[bool],
) -> f64 {
    let (ratings, inv, rows, skip) = (&ratings[..n], &inv[..n], &rows[..n], &skip[..n]);
    let mut m = 0.0f64;
    let mut lo = top.threshold() * (1.0 - SLACK);
    for r in 0..n {
        let f = flow(r);
        let a = f.abs();
        if a * inv[r] >= lo {
            let v = a / ratings[r];
            if v > m {
                m = v;
            }
            if !skip[r] {
                top.push(Hit { rel: v, case, branch: rows[r], flow: f });
            }
            lo = m.min(top.threshold()) * (1.0 - SLACK);
        }
    }
    m
}

/// Maximum relative load over N-0 and every N-1 case. `None` cases are
/// islanding outages: they contribute `penalty` under the penalize policy
/// and make the metric infinite otherwise.
pub fn agg_m(n0: &[f64], n1: &[Option<Vec<f64>>], ratings: &[f64], policy: IslandingPolicy, penalty: f64) -> f64 {
    let mut m = max_relative(n0, ratings);
    for case in n1 {
        let v = match case {
            Some(flows) => max_relative(flows, ratings),
            None => match policy {
                IslandingPolicy::Penalize => penalty,
                IslandingPolicy::Error => f64::INFINITY,
            },
        };
        if v > m {
            m = v;
        }
    }
    m
}

/// Candidate entry during selection.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Hit {
    pub rel: f64,
    pub case: usize,
    pub branch: usize,
    pub flow: f64,
}

fn hit_order(a: &Hit, b: &Hit) -> Ordering {
    b.rel
        .partial_cmp(&a.rel)
        .unwrap_or(Ordering::Equal)
        .then(a.case.cmp(&b.case))
        .then(a.branch.cmp(&b.branch))
}

/// Keeps the `k` best hits seen so far in report order.
#[derive(Debug, Clone)]
pub(crate) struct TopK {
    k: usize,
    hits: Vec<Hit>,
}

impl TopK {
    pub(crate) fn new(k: usize) -> Self {
        TopK { k, hits: Vec::with_capacity(k + 1) }
    }

    pub(crate) fn clear(&mut self) {
        self.hits.clear();
    }

    #[inline]
    pub(crate) fn push(&mut self, h: Hit) {
        if self.hits.len() == self.k {
            let worst = &self.hits[self.k - 1];
            if h.rel < worst.rel || hit_order(&h, worst) != Ordering::Less {
                return;
            }
        }
        let pos = self.hits.partition_point(|x| hit_order(x, &h) == Ordering::Less);
        self.hits.insert(pos, h);
        self.hits.truncate(self.k);
    }

    /// Relative load a hit needs to enter; 0 until the list is full.
    #[inline]
    fn threshold(&self) -> f64 {
        if self.hits.len() < self.k {
            0.0
        } else {
            self.hits[self.k - 1].rel
        }
    }

    pub(crate) fn hits(&self) -> &[Hit] {
        &self.hits
    }
}

/// Collects the two-stage top-k while cases stream past.
#[derive(Debug, Clone)]
pub(crate) struct ReportBuilder {
    n0: TopK,
    case: TopK,
    pool: Vec<Hit>,
    topk_global: usize,
}

impl ReportBuilder {
    pub(crate) fn new(cfg: &SolveConfig) -> Self {
        ReportBuilder {
            n0: TopK::new(cfg.topk_per_case),
            case: TopK::new(cfg.topk_per_case),
            pool: Vec::new(),
            topk_global: cfg.topk_global,
        }
    }

    pub(crate) fn reset(&mut self) {
        self.n0.clear();
        self.pool.clear();
    }

    /// `rows` maps monitored row position to branch index; `skip` marks
    /// rows that are not reported (disconnected branches).
    pub(crate) fn add_n0(&mut self, flows: &[f64], ratings: &[f64], rows: &[usize], skip: &[bool]) {
        for (r, (&f, &rt)) in flows.iter().zip(ratings).enumerate() {
            if !skip[r] {
                self.n0.push(Hit { rel: relative_load(f, rt), case: 0, branch: rows[r], flow: f });
            }
        }
    }

    /// Fused form of [`Self::add_n0`]; returns the largest relative load
    /// over all rows, reported or not.
    #[inline(always)]
    pub(crate) fn scan_n0(&mut self, flows: &[f64], ratings: &[f64], inv: &[f64], rows: &[usize], skip: &[bool]) -> f64 {
        scan_top(&mut self.n0, 0, flows.len(), |r| flows[r], ratings, inv, rows, skip)
    }

    /// Fused form of [`Self::add_case`] over rows `0..n` given by `flow`.
    #[inline(always)]
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn scan_case(
        &mut self,
        case: usize,
        n: usize,
        flow: impl Fn(usize) -> f64,
        ratings: &[f64],
        inv: &[f64],
        rows: &[usize],
        skip: &[bool],
    ) -> f64 {
        self.case.clear();
        let m = scan_top(&mut self.case, case, n, flow, ratings, inv, rows, skip);
        self.pool.extend_from_slice(self.case.hits());
        m
    }

    pub(crate) fn add_case(&mut self, case: usize, flows: &[f64], ratings: &[f64], rows: &[usize], skip: &[bool]) {
        self.case.clear();
        for (r, (&f, &rt)) in flows.iter().zip(ratings).enumerate() {
            if !skip[r] {
                self.case.push(Hit { rel: relative_load(f, rt), case, branch: rows[r], flow: f });
            }
        }
        self.pool.extend_from_slice(self.case.hits());
    }

    pub(crate) fn finish(&mut self, branch_ids: impl Fn(usize) -> String, case_ids: impl Fn(usize) -> String) -> SparseReport {
        self.pool.sort_by(hit_order);
        self.pool.truncate(self.topk_global);
        SparseReport {
            n0_worst: self
                .n0
                .hits()
                .iter()
                .map(|h| N0Entry { branch: branch_ids(h.branch), flow_mw: h.flow, relative_load: h.rel })
                .collect(),
            n1_worst: self
                .pool
                .iter()
                .map(|h| N1Entry {
                    contingency: case_ids(h.case),
                    branch: branch_ids(h.branch),
                    flow_mw: h.flow,
                    relative_load: h.rel,
                })
                .collect(),
        }
    }
}

/// Two-stage top-k report from explicit flows: per case the
/// `topk_per_case` worst monitored branches, then the `topk_global` worst
/// of their union. `monitored` gives the branch index of every flow entry;
/// islanding cases (`None`) are not reported.
pub fn agg_i(
    n0: &[f64],
    n1: &[Option<Vec<f64>>],
    ratings: &[f64],
    monitored: &[usize],
    cfg: &SolveConfig,
    branch_ids: impl Fn(usize) -> String,
    case_ids: impl Fn(usize) -> String,
) -> SparseReport {
    let skip = vec![false; n0.len()];
    let mut b = ReportBuilder::new(cfg);
    b.add_n0(n0, ratings, monitored, &skip);
    for (c, case) in n1.iter().enumerate() {
        if let Some(flows) = case {
            b.add_case(c, flows, ratings, monitored, &skip);
        }
    }
    b.finish(branch_ids, case_ids)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(per_case: usize, global: usize) -> SolveConfig {
        SolveConfig { topk_per_case: per_case, topk_global: global, ..Default::default() }
    }

    #[test]
    fn metric_is_largest_ratio() {
        let n1 = vec![Some(vec![120.0, 10.0])];
        assert_eq!(agg_m(&[50.0, -80.0], &n1, &[100.0, 100.0], IslandingPolicy::Penalize, 10.0), 1.2);
        assert_eq!(agg_m(&[0.0, 0.0], &[Some(vec![0.0, 0.0])], &[100.0, 100.0], IslandingPolicy::Penalize, 10.0), 0.0);
    }

    #[test]
    fn islanding_case_follows_policy() {
        let n1 = vec![Some(vec![1.0]), None];
        assert_eq!(agg_m(&[1.0], &n1, &[10.0], IslandingPolicy::Penalize, 10.0), 10.0);
        assert_eq!(agg_m(&[1.0], &n1, &[10.0], IslandingPolicy::Error, 10.0), f64::INFINITY);
    }

    #[test]
    fn two_stage_top_k_matches_enumeration() {
        let n1: Vec<Option<Vec<f64>>> = vec![
            Some(vec![10.0, 90.0, 30.0, 80.0]),
            Some(vec![70.0, 20.0, 60.0, 50.0]),
            Some(vec![85.0, 5.0, 95.0, 15.0]),
        ];
        let ratings = [100.0; 4];
        let rep = agg_i(&[0.0; 4], &n1, &ratings, &[0, 1, 2, 3], &cfg(2, 3), |b| b.to_string(), |c| c.to_string());
        let got: Vec<(String, String, f64)> =
            rep.n1_worst.iter().map(|e| (e.contingency.clone(), e.branch.clone(), e.flow_mw)).collect();
        // per-case top-2: {90, 80}, {70, 60}, {95, 85}; global top-3:
        assert_eq!(
            got,
            vec![("2".into(), "2".into(), 95.0), ("0".into(), "1".into(), 90.0), ("2".into(), "0".into(), 85.0)]
        );
    }

    #[test]
    fn per_case_stage_keeps_other_cases_alive() {
        let n1 = vec![Some(vec![99.0, 98.0, 97.0, 96.0]), Some(vec![10.0, 0.0, 0.0, 0.0])];
        let rep = agg_i(&[0.0; 4], &n1, &[100.0; 4], &[0, 1, 2, 3], &cfg(1, 2), |b| b.to_string(), |c| c.to_string());
        assert_eq!(rep.n1_worst[1].contingency, "1");
    }

    #[test]
    fn ties_order_by_case_then_branch() {
        let n1 = vec![Some(vec![50.0, 50.0]), Some(vec![50.0, 50.0])];
        let rep = agg_i(&[50.0, -50.0], &n1, &[100.0; 2], &[4, 7], &cfg(2, 4), |b| b.to_string(), |c| c.to_string());
        let order: Vec<(&str, &str)> = rep.n1_worst.iter().map(|e| (e.contingency.as_str(), e.branch.as_str())).collect();
        assert_eq!(order, vec![("0", "4"), ("0", "7"), ("1", "4"), ("1", "7")]);
        assert_eq!(rep.n0_worst[0].branch, "4");
    }

    fn hits(top: &TopK) -> Vec<(u64, usize, usize, u64)> {
        top.hits().iter().map(|h| (h.rel.to_bits(), h.case, h.branch, h.flow.to_bits())).collect()
    }

    proptest::proptest! {
        // Values drawn from a small grid so exact ties and near-ties are common.
        #[test]
        fn fused_scans_match_plain_ones(
            cases in proptest::collection::vec(proptest::collection::vec(-40i32..40, 12), 1..6),
            ratings in proptest::collection::vec(1u8..5, 12),
            skip in proptest::collection::vec(proptest::bool::weighted(0.2), 12),
            k in 1usize..5,
        ) {
            let ratings: Vec<f64> = ratings.iter().map(|&r| r as f64 * 0.3).collect();
            let inv: Vec<f64> = ratings.iter().map(|r| 1.0 / r).collect();
            let rows: Vec<usize> = (0..12).map(|r| 3 * r + 1).collect();
            let c = cfg(k, 2 * k);
            let (mut plain, mut fused) = (ReportBuilder::new(&c), ReportBuilder::new(&c));
            for (i, case) in cases.iter().enumerate() {
                let flows: Vec<f64> = case.iter().map(|&v| v as f64 * 0.1).collect();
                let want = max_relative(&flows, &ratings);
                proptest::prop_assert_eq!(scan_max(12, |r| flows[r], &ratings, &inv).to_bits(), want.to_bits());
                if i == 0 {
                    plain.add_n0(&flows, &ratings, &rows, &skip);
                    let got = fused.scan_n0(&flows, &ratings, &inv, &rows, &skip);
                    proptest::prop_assert_eq!(got.to_bits(), want.to_bits());
                    proptest::prop_assert_eq!(hits(&plain.n0), hits(&fused.n0));
                }
                plain.add_case(i, &flows, &ratings, &rows, &skip);
                let got = fused.scan_case(i, 12, |r| flows[r], &ratings, &inv, &rows, &skip);
                proptest::prop_assert_eq!(got.to_bits(), want.to_bits());
            }
            let a = plain.finish(|b| b.to_string(), |c| c.to_string());
            let b = fused.finish(|b| b.to_string(), |c| c.to_string());
            proptest::prop_assert_eq!(a, b);
        }
    }
}
