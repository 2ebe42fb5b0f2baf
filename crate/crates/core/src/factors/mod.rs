//! Distribution factors: PTDF construction and the low-rank updates that
//! act on it (LODF, MODF, BSDF).
//!
//! [`PtdfMatrix`] stores a dense block of retained branch rows by effective
//! node columns in column-major order, because nearly every update reads
//! whole columns (injection deltas, outage transfer columns, split shift
//! vectors). Monitored rows come first so the N-1 hot loop can walk a
//! contiguous prefix of every column.
//!
//! All update operations return a new matrix; the base matrix can be shared
//! between workers without locking.

pub mod bsdf;
pub mod dump;
pub mod lodf;
mod lu;
pub mod modf;
pub mod ptdf;

use std::sync::Arc;

pub use bsdf::{apply_bsdf, compute_bsdf, BsdfUpdate};
pub use lodf::{apply_outage_to_flows, apply_outage_to_ptdf, lodf_column};
pub use modf::{apply_modf_to_flows, apply_modf_to_ptdf, compute_modf, ModfMatrix};
pub use ptdf::{build_susceptance, compute_ptdf, reduce_static, retained_rows, SusceptanceMatrices};

/// Denominators of LODF/MODF/BSDF below this magnitude mean the update
/// would island part of the grid.
pub const ISLANDING_TOL: f64 = 1e-8;

pub(crate) const NONE: usize = usize::MAX;

/// Row bookkeeping shared by every matrix derived from one base PTDF.
#[derive(Debug)]
pub(crate) struct RowLayout {
    pub(crate) row_branch: Vec<usize>,
    pub(crate) branch_row: Vec<usize>,
    pub(crate) monitored_rows: usize,
    pub(crate) branch_ids: Vec<String>,
    pub(crate) susceptance: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AppliedUpdate {
    Split {
        node: usize,
        new_node: usize,
        moved: Vec<usize>,
    },
    Outage {
        branches: Vec<usize>,
    },
    StaticReduction {
        folded_nodes: usize,
    },
}

/// What a column stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKey {
    Node(usize),
    /// Pre-multiplied flows of all folded static nodes; nodal power 1.
    Static,
}

#[derive(Debug, Clone)]
pub struct PtdfMatrix {
    values: Vec<f64>,
    rows: usize,
    cols: usize,
    layout: Arc<RowLayout>,
    col_key: Vec<ColumnKey>,
    node_col: Vec<usize>,
    static_col: Option<usize>,
    /// Current endpoints of every grid branch (rows or not); splits move
    /// endpoints onto new nodes.
    ends: Vec<(usize, usize)>,
    slack: usize,
    base_nodes: usize,
    node_count: usize,
    applied: Vec<AppliedUpdate>,
}

impl PtdfMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of leading rows that belong to monitored branches.
    pub fn monitored_rows(&self) -> usize {
        self.layout.monitored_rows
    }

    pub fn row_branch(&self, row: usize) -> usize {
        self.layout.row_branch[row]
    }

    pub fn row_branches(&self) -> &[usize] {
        &self.layout.row_branch
    }

    pub fn branch_row(&self, branch: usize) -> Option<usize> {
        match self.layout.branch_row.get(branch) {
            Some(&r) if r != NONE => Some(r),
            _ => None,
        }
    }

    pub fn branch_id(&self, branch: usize) -> &str {
        &self.layout.branch_ids[branch]
    }

    pub fn susceptance(&self, branch: usize) -> f64 {
        self.layout.susceptance[branch]
    }

    pub fn column_key(&self, col: usize) -> ColumnKey {
        self.col_key[col]
    }

    pub fn node_col(&self, node: usize) -> Option<usize> {
        match self.node_col.get(node) {
            Some(&c) if c != NONE => Some(c),
            _ => None,
        }
    }

    pub fn static_col(&self) -> Option<usize> {
        self.static_col
    }

    pub fn slack(&self) -> usize {
        self.slack
    }

    /// Node count including nodes created by splits.
    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Node count of the unsplit grid.
    pub fn base_nodes(&self) -> usize {
        self.base_nodes
    }

    pub fn branch_ends(&self, branch: usize) -> (usize, usize) {
        self.ends[branch]
    }

    pub fn applied_updates(&self) -> &[AppliedUpdate] {
        &self.applied
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[col * self.rows + row]
    }

    pub fn column(&self, col: usize) -> &[f64] {
        &self.values[col * self.rows..(col + 1) * self.rows]
    }

    /// Column of `node`, or `None` for folded nodes. The slack column is
    /// materialized as zeros.
    pub fn node_column(&self, node: usize) -> Option<&[f64]> {
        self.node_col(node).map(|c| self.column(c))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Maps a per-node power vector (indexed by node id, possibly including
    /// split nodes) onto columns. Folded nodes are skipped; their power is
    /// already inside the static column, which gets a fixed 1.
    pub fn nodal_vector(&self, node_power: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; self.cols];
        for (c, key) in self.col_key.iter().enumerate() {
            p[c] = match *key {
                ColumnKey::Node(n) => node_power.get(n).copied().unwrap_or(0.0),
                ColumnKey::Static => 1.0,
            };
        }
        p
    }

    fn with_values(&self, values: Vec<f64>) -> PtdfMatrix {
        debug_assert_eq!(values.len(), self.rows * self.cols);
        PtdfMatrix {
            values,
            rows: self.rows,
            cols: self.cols,
            layout: Arc::clone(&self.layout),
            col_key: self.col_key.clone(),
            node_col: self.node_col.clone(),
            static_col: self.static_col,
            ends: self.ends.clone(),
            slack: self.slack,
            base_nodes: self.base_nodes,
            node_count: self.node_count,
            applied: self.applied.clone(),
        }
    }
}

/// N-0 flows `PTDF · P` for a nodal vector aligned to the columns.
pub fn n0_flows(ptdf: &PtdfMatrix, nodal_power: &[f64]) -> Vec<f64> {
    assert_eq!(nodal_power.len(), ptdf.cols(), "nodal vector must match columns");
    let mut flows = vec![0.0; ptdf.rows()];
    for (c, &p) in nodal_power.iter().enumerate() {
        if p != 0.0 {
            axpy(p, ptdf.column(c), &mut flows);
        }
    }
    flows
}

/// Updates previously computed flows for a sparse change of nodal power,
/// given as `(column, MW)` pairs.
pub fn n0_delta(ptdf: &PtdfMatrix, base_flows: &[f64], delta: &[(usize, f64)]) -> Vec<f64> {
    let mut flows = base_flows.to_vec();
    for &(c, p) in delta {
        axpy(p, ptdf.column(c), &mut flows);
    }
    flows
}

#[inline]
pub(crate) fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[cfg(test)]
pub(crate) mod test_grids {
    use crate::grid::{Branch, Grid, GridParts, Injection};

    pub(crate) fn br(id: &str, from: usize, to: usize, b: f64) -> Branch {
        Branch { id: id.into(), from, to, susceptance: b, rating: 100.0, monitored: true }
    }

    /// Triangle: e0 = (0,1), e1 = (1,2), e2 = (0,2), all b = 1, slack 0.
    pub(crate) fn triangle() -> Grid {
        Grid::new(GridParts {
            node_ids: (0..3).map(|i| i.to_string()).collect(),
            branches: vec![br("e0", 0, 1, 1.0), br("e1", 1, 2, 1.0), br("e2", 0, 2, 1.0)],
            injections: vec![Injection { id: "g1".into(), node: 1, p_mw: 90.0 }],
            slack: 0,
            ..Default::default()
        })
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::test_grids::triangle;
    use super::*;

    fn full(g: &crate::grid::Grid) -> PtdfMatrix {
        compute_ptdf(g, &retained_rows(g, &[])).unwrap()
    }

    #[test]
    fn triangle_flows_for_90_mw_at_node_1() {
        let g = triangle();
        let p = full(&g);
        let flows = n0_flows(&p, &p.nodal_vector(&g.nodal_power()));
        let expected = [-60.0, 30.0, -30.0];
        for (f, e) in flows.iter().zip(expected) {
            assert!((f - e).abs() < 1e-12, "{flows:?}");
        }
    }

    #[test]
    fn zero_injection_gives_zero_flow() {
        let g = triangle();
        let p = full(&g);
        assert!(n0_flows(&p, &vec![0.0; p.cols()]).iter().all(|&f| f == 0.0));
    }

    #[test]
    fn delta_update_matches_recompute() {
        let g = triangle();
        let p = full(&g);
        let base = n0_flows(&p, &[0.0, 90.0, 0.0]);
        let upd = n0_delta(&p, &base, &[(2, 30.0)]);
        let direct = n0_flows(&p, &[0.0, 90.0, 30.0]);
        for (a, b) in upd.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(n0_delta(&p, &base, &[]), base);
    }

    #[test]
    fn moving_injection_between_nodes_is_a_two_entry_delta() {
        let g = triangle();
        let p = full(&g);
        let base = n0_flows(&p, &[0.0, 90.0, 0.0]);
        let moved = n0_delta(&p, &base, &[(1, -90.0), (2, 90.0)]);
        let direct = n0_flows(&p, &[0.0, 0.0, 90.0]);
        for (a, b) in moved.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
