use std::collections::BTreeSet;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::{AppliedUpdate, ColumnKey, PtdfMatrix, RowLayout, NONE};
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Dense nodal susceptance matrix `B` (a graph Laplacian) and weighted
/// connectivity matrix `C_w` (`+b` at the from-node, `-b` at the to-node).
#[derive(Debug, Clone)]
pub struct SusceptanceMatrices {
    pub laplacian: DMatrix<f64>,
    pub weighted_connectivity: DMatrix<f64>,
}

pub fn build_susceptance(grid: &Grid) -> SusceptanceMatrices {
    let n = grid.node_count();
    let m = grid.branches().len();
    let mut laplacian = DMatrix::zeros(n, n);
    let mut cw = DMatrix::zeros(m, n);
    for (l, br) in grid.branches().iter().enumerate() {
        let b = br.susceptance;
        cw[(l, br.from)] = b;
        cw[(l, br.to)] = -b;
        laplacian[(br.from, br.from)] += b;
        laplacian[(br.to, br.to)] += b;
        laplacian[(br.from, br.to)] -= b;
        laplacian[(br.to, br.from)] -= b;
    }
    SusceptanceMatrices {
        laplacian,
        weighted_connectivity: cw,
    }
}

/// Branch rows the solver needs: all monitored branches (grid order), then
/// substation, contingency and `extra` branches in index order.
pub fn retained_rows(grid: &Grid, extra: &[usize]) -> Vec<usize> {
    let mut rest = BTreeSet::new();
    for sub in grid.substations() {
        rest.extend(sub.branch_elements.iter().copied());
    }
    for c in grid.contingencies() {
        rest.extend(c.branches.iter().copied());
    }
    rest.extend(extra.iter().copied().filter(|&b| b < grid.branches().len()));
    let mut rows = grid.monitored().to_vec();
    rows.extend(rest.into_iter().filter(|&b| !grid.branches()[b].monitored));
    rows
}

/// Solves `PTDF' · B' = C_w'` with the slack row and column removed and
/// materializes the slack column as zeros. Only the requested branch rows
/// are kept; monitored branches are always kept and come first.
pub fn compute_ptdf(grid: &Grid, retained: &[usize]) -> Result<PtdfMatrix> {
    let n = grid.node_count();
    let slack = grid.slack();
    let branches = grid.branches();

    let mut rows: Vec<usize> = grid.monitored().to_vec();
    let mut seen: BTreeSet<usize> = rows.iter().copied().collect();
    let mut rest: Vec<usize> = retained
        .iter()
        .copied()
        .filter(|b| *b < branches.len() && seen.insert(*b))
        .collect();
    rest.sort_unstable();
    rows.extend(rest);
    let nrows = rows.len();

    let reduced = |v: usize| if v < slack { Some(v) } else if v == slack { None } else { Some(v - 1) };
    let dim = n - 1;
    let mut b_red = DMatrix::<f64>::zeros(dim, dim);
    for br in branches {
        let b = br.susceptance;
        let (f, t) = (reduced(br.from), reduced(br.to));
        if let Some(f) = f {
            b_red[(f, f)] += b;
        }
        if let Some(t) = t {
            b_red[(t, t)] += b;
        }
        if let (Some(f), Some(t)) = (f, t) {
            b_red[(f, t)] -= b;
            b_red[(t, f)] -= b;
        }
    }
    let mut rhs = DMatrix::<f64>::zeros(dim, nrows);
    for (r, &l) in rows.iter().enumerate() {
        let br = &branches[l];
        if let Some(f) = reduced(br.from) {
            rhs[(f, r)] = br.susceptance;
        }
        if let Some(t) = reduced(br.to) {
            rhs[(t, r)] = -br.susceptance;
        }
    }
    let solution = if dim == 0 {
        rhs
    } else {
        let chol = b_red
            .cholesky()
            .ok_or_else(|| Error::SingularSystem("reduced susceptance matrix is not positive definite".into()))?;
        chol.solve(&rhs)
    };

    let mut values = vec![0.0; nrows * n];
    for node in 0..n {
        if let Some(k) = reduced(node) {
            let col = &mut values[node * nrows..(node + 1) * nrows];
            for (r, v) in col.iter_mut().enumerate() {
                *v = solution[(k, r)];
            }
        }
    }

    let mut branch_row = vec![NONE; branches.len()];
    for (r, &l) in rows.iter().enumerate() {
        branch_row[l] = r;
    }
    let layout = RowLayout {
        monitored_rows: grid.monitored().len(),
        row_branch: rows,
        branch_row,
        branch_ids: branches.iter().map(|b| b.id.clone()).collect(),
        susceptance: branches.iter().map(|b| b.susceptance).collect(),
    };
    Ok(PtdfMatrix {
        values,
        rows: nrows,
        cols: n,
        layout: Arc::new(layout),
        col_key: (0..n).map(ColumnKey::Node).collect(),
        node_col: (0..n).collect(),
        static_col: None,
        ends: branches.iter().map(|b| (b.from, b.to)).collect(),
        slack,
        base_nodes: n,
        node_count: n,
        applied: Vec::new(),
    })
}

/// Drops the columns of the static node set `static_nodes` and appends one
/// column holding their pre-multiplied flow contribution
/// `p_T[l] = sum over m in T of PTDF[l, m] * P[m]`. Evaluating flows with
/// a nodal power of 1 on that column reproduces the unreduced flows.
pub fn reduce_static(
    ptdf: &PtdfMatrix,
    grid: &Grid,
    static_nodes: &[usize],
    node_power: &[f64],
) -> Result<PtdfMatrix> {
    if ptdf.static_col.is_some() {
        return Err(Error::InvalidReduction("matrix is already reduced".into()));
    }
    if ptdf.node_count != ptdf.base_nodes {
        return Err(Error::InvalidReduction("reduction must precede splits".into()));
    }
    let mut protected = BTreeSet::new();
    for sub in grid.substations() {
        protected.insert(sub.node);
        for &i in &sub.injection_elements {
            protected.insert(grid.injections()[i].node);
        }
    }
    let folded: BTreeSet<usize> = static_nodes.iter().copied().collect();
    if let Some(&bad) = folded.iter().find(|v| protected.contains(v)) {
        return Err(Error::InvalidReduction(format!(
            "node {:?} hosts a substation or movable injection",
            grid.node_ids().get(bad).map(String::as_str).unwrap_or("?")
        )));
    }
    if let Some(&bad) = folded.iter().find(|&&v| ptdf.node_col(v).is_none()) {
        return Err(Error::InvalidReduction(format!("node {bad} has no column")));
    }

    let rows = ptdf.rows;
    let mut p_t = vec![0.0; rows];
    for &m in &folded {
        let p = node_power.get(m).copied().unwrap_or(0.0);
        if p != 0.0 {
            super::axpy(p, ptdf.column(ptdf.node_col[m]), &mut p_t);
        }
    }

    let mut values = Vec::with_capacity(rows * (ptdf.cols - folded.len() + 1));
    let mut col_key = Vec::new();
    let mut node_col = vec![NONE; ptdf.node_count];
    for c in 0..ptdf.cols {
        if let ColumnKey::Node(v) = ptdf.col_key[c] {
            if folded.contains(&v) {
                continue;
            }
            node_col[v] = col_key.len();
        }
        col_key.push(ptdf.col_key[c]);
        values.extend_from_slice(ptdf.column(c));
    }
    let static_col = col_key.len();
    col_key.push(ColumnKey::Static);
    values.extend_from_slice(&p_t);

    let mut applied = ptdf.applied.clone();
    applied.push(AppliedUpdate::StaticReduction {
        folded_nodes: folded.len(),
    });
    Ok(PtdfMatrix {
        values,
        rows,
        cols: col_key.len(),
        layout: Arc::clone(&ptdf.layout),
        col_key,
        node_col,
        static_col: Some(static_col),
        ends: ptdf.ends.clone(),
        slack: ptdf.slack,
        base_nodes: ptdf.base_nodes,
        node_count: ptdf.node_count,
        applied,
    })
}
