//! Busbar splits.
//!
//! Splitting substation node `A` moves the branches flagged in the
//! assignment (the move set `M`) onto a new node `B`; the remaining branches
//! form the stay set `S`. The update is
//!
//! ```text
//! P_shift   = -e_B + sum over l in S of (b_l / b_S) e_far(l)
//! P_corr[l] = sigma_l b_l / b_S                       for l in S
//! bbc       = sum over l in M of sigma_l PTDF[l, :] - e_B
//! BSDF      = (PTDF · P_shift + P_corr) / (1 - bbc · P_shift)
//! PTDF'     = PTDF + BSDF · bbc
//! ```
//!
//! where `PTDF` already carries a column for `B` copied from `A`,
//! `b_S` is the stay-set susceptance sum and `sigma_l` is `+1` if `A` is
//! the from-node of `l`, `-1` otherwise. The result equals the PTDF of the
//! explicitly split grid; the unit tests lock this against refactorization.

use super::{AppliedUpdate, ColumnKey, PtdfMatrix, ISLANDING_TOL};
use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Debug, Clone, PartialEq)]
pub struct BsdfUpdate {
    pub substation: usize,
    /// Node being split (`A`).
    pub node: usize,
    /// Node index allocated for `B`; equals the matrix's node count.
    pub new_node: usize,
    /// Branches moved to `B`. Empty for an identity split.
    pub moved: Vec<usize>,
    /// Over retained rows.
    pub bsdf: Vec<f64>,
    /// Over the extended columns (existing columns plus `B`).
    pub ptdf_bbc: Vec<f64>,
    pub denominator: f64,
}

impl BsdfUpdate {
    pub fn is_identity(&self) -> bool {
        self.moved.is_empty()
    }
}

pub fn compute_bsdf(
    ptdf: &PtdfMatrix,
    grid: &Grid,
    substation: usize,
    assignment: &[bool],
) -> Result<BsdfUpdate> {
    let sub = grid
        .substations()
        .get(substation)
        .ok_or_else(|| Error::InvalidTask(format!("substation index {substation} out of range")))?;
    let sub_id = || grid.node_ids()[sub.node].clone();
    if assignment.len() != sub.branch_elements.len() {
        return Err(Error::InvalidTask(format!(
            "substation {:?} expects {} branch bits, got {}",
            sub_id(),
            sub.branch_elements.len(),
            assignment.len()
        )));
    }
    let a = sub.node;
    let new_node = ptdf.node_count;
    let moved: Vec<usize> = sub
        .branch_elements
        .iter()
        .zip(assignment)
        .filter(|(_, &m)| m)
        .map(|(&b, _)| b)
        .collect();
    if moved.is_empty() {
        return Ok(BsdfUpdate {
            substation,
            node: a,
            new_node,
            moved,
            bsdf: vec![0.0; ptdf.rows],
            ptdf_bbc: vec![0.0; ptdf.cols + 1],
            denominator: 1.0,
        });
    }
    let col_a = ptdf
        .node_col(a)
        .ok_or_else(|| Error::InvalidTask(format!("substation {:?} has no column", sub_id())))?;
    let col_b = ptdf.cols;
    let rows = ptdf.rows;

    // (row, column of far end, sigma, susceptance) per element
    let mut stay = Vec::new();
    let mut shift_cols = Vec::new();
    let mut bbc = vec![0.0; ptdf.cols + 1];
    let mut b_s = 0.0;
    for (&l, &is_moved) in sub.branch_elements.iter().zip(assignment) {
        let (f, t) = ptdf.ends[l];
        let sigma = if f == a {
            1.0
        } else if t == a {
            -1.0
        } else {
            return Err(Error::InvalidTask(format!(
                "branch {:?} no longer touches substation {:?}",
                ptdf.branch_id(l),
                sub_id()
            )));
        };
        let row = ptdf
            .branch_row(l)
            .ok_or_else(|| Error::InvalidTask(format!("branch {:?} has no retained row", ptdf.branch_id(l))))?;
        if is_moved {
            for (c, v) in bbc.iter_mut().enumerate().take(ptdf.cols) {
                *v += sigma * ptdf.get(row, c);
            }
            bbc[col_b] += sigma * ptdf.get(row, col_a);
        } else {
            let far = if f == a { t } else { f };
            let col_far = ptdf.node_col(far).ok_or_else(|| {
                Error::InvalidTask(format!("far end of branch {:?} has no column", ptdf.branch_id(l)))
            })?;
            let b = ptdf.susceptance(l);
            b_s += b;
            stay.push((row, sigma, b));
            shift_cols.push((col_far, b));
        }
    }
    if stay.is_empty() || b_s.is_nan() || b_s <= 0.0 {
        return Err(Error::DegenerateSplit { substation: sub_id() });
    }
    bbc[col_b] -= 1.0;

    // P_shift as sparse (column, weight) pairs; column B is a copy of A.
    let mut den = 1.0 + bbc[col_b];
    for &(c, b) in &shift_cols {
        den -= bbc[c] * b / b_s;
    }
    if den.abs() < ISLANDING_TOL {
        return Err(Error::SingularSplit {
            substation: sub_id(),
            denominator: den,
        });
    }

    let mut bsdf: Vec<f64> = ptdf.column(col_a).iter().map(|v| -v).collect();
    for &(c, b) in &shift_cols {
        super::axpy(b / b_s, ptdf.column(c), &mut bsdf);
    }
    for &(row, sigma, b) in &stay {
        bsdf[row] += sigma * b / b_s;
    }
    for v in bsdf.iter_mut() {
        *v /= den;
    }
    debug_assert_eq!(bsdf.len(), rows);

    Ok(BsdfUpdate {
        substation,
        node: a,
        new_node,
        moved,
        bsdf,
        ptdf_bbc: bbc,
        denominator: den,
    })
}

/// Applies a split. Identity updates return the matrix unchanged (no new
/// column); otherwise column `B` is appended and the moved branches are
/// re-attached to it.
pub fn apply_bsdf(ptdf: &PtdfMatrix, update: &BsdfUpdate) -> PtdfMatrix {
    if update.is_identity() {
        return ptdf.clone();
    }
    assert_eq!(update.new_node, ptdf.node_count, "update built for another matrix");
    assert_eq!(update.ptdf_bbc.len(), ptdf.cols + 1, "update built for another matrix");
    let rows = ptdf.rows;
    let cols = ptdf.cols + 1;
    let col_a = ptdf.node_col[update.node];
    let mut values = Vec::with_capacity(rows * cols);
    values.extend_from_slice(&ptdf.values);
    values.extend_from_slice(ptdf.column(col_a));
    for (c, &w) in update.ptdf_bbc.iter().enumerate() {
        if w != 0.0 {
            super::axpy(w, &update.bsdf, &mut values[c * rows..(c + 1) * rows]);
        }
    }

    let mut ends = ptdf.ends.clone();
    for &l in &update.moved {
        let e = &mut ends[l];
        if e.0 == update.node {
            e.0 = update.new_node;
        } else {
            e.1 = update.new_node;
        }
    }
    let mut col_key = ptdf.col_key.clone();
    col_key.push(ColumnKey::Node(update.new_node));
    let mut node_col = ptdf.node_col.clone();
    node_col.push(cols - 1);
    let mut applied = ptdf.applied.clone();
    applied.push(AppliedUpdate::Split {
        node: update.node,
        new_node: update.new_node,
        moved: update.moved.clone(),
    });
    PtdfMatrix {
        values,
        rows,
        cols,
        layout: ptdf.layout.clone(),
        col_key,
        node_col,
        static_col: ptdf.static_col,
        ends,
        slack: ptdf.slack,
        base_nodes: ptdf.base_nodes,
        node_count: ptdf.node_count + 1,
        applied,
    }
}

#[cfg(test)]
mod tests {
    use super::super::test_grids::{br, triangle};
    use super::super::{compute_ptdf, retained_rows};
    use super::*;
    use crate::grid::{GridParts, Substation};

    /// Compares every column of `upd` against a from-scratch PTDF of
    /// `explicit`, whose node indices match the split numbering.
    fn assert_matches(upd: &PtdfMatrix, explicit: &Grid, tol: f64) {
        let direct = compute_ptdf(explicit, upd.row_branches()).unwrap();
        assert_eq!(direct.row_branches(), upd.row_branches());
        for node in 0..explicit.node_count() {
            let a = upd.node_column(node).unwrap();
            let b = direct.node_column(node).unwrap();
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < tol, "node {node}: {a:?} vs {b:?}");
            }
        }
    }

    fn split_triangle() -> Grid {
        let mut parts = triangle().into_parts();
        parts.substations.push(Substation { node: 1, branch_elements: vec![0, 1], injection_elements: vec![0] });
        Grid::new(parts).unwrap()
    }

    #[test]
    fn identity_split_is_a_no_op() {
        let g = split_triangle();
        let p = compute_ptdf(&g, &retained_rows(&g, &[])).unwrap();
        let u = compute_bsdf(&p, &g, 0, &[false, false]).unwrap();
        assert!(u.is_identity());
        assert!(u.bsdf.iter().all(|&v| v == 0.0));
        assert_eq!(apply_bsdf(&p, &u).values(), p.values());
    }

    #[test]
    fn triangle_split_matches_explicit_grid() {
        // Node 1 keeps e1; e0 moves to node 3. The triangle becomes the path
        // 3 - 0 - 2 - 1 with B hanging off the slack.
        let g = split_triangle();
        let p = compute_ptdf(&g, &retained_rows(&g, &[])).unwrap();
        let u = compute_bsdf(&p, &g, 0, &[true, false]).unwrap();
        let s = apply_bsdf(&p, &u);
        assert_eq!(s.node_count(), 4);
        assert_eq!(s.branch_ends(0), (0, 3));
        let explicit = Grid::new(GridParts {
            node_ids: (0..4).map(|i| i.to_string()).collect(),
            branches: vec![br("e0", 0, 3, 1.0), br("e1", 1, 2, 1.0), br("e2", 0, 2, 1.0)],
            slack: 0,
            ..Default::default()
        })
        .unwrap();
        assert_matches(&s, &explicit, 1e-12);
    }

    #[test]
    fn moving_every_branch_is_degenerate() {
        let g = split_triangle();
        let p = compute_ptdf(&g, &retained_rows(&g, &[])).unwrap();
        assert!(matches!(compute_bsdf(&p, &g, 0, &[true, true]), Err(Error::DegenerateSplit { .. })));
    }

    #[test]
    fn cut_vertex_split_is_singular() {
        // Path 0 - 1 - 2 with 1 as substation: moving (1,2) to B isolates 2.
        let g = Grid::new(GridParts {
            node_ids: (0..3).map(|i| i.to_string()).collect(),
            branches: vec![br("a", 0, 1, 1.0), br("b", 1, 2, 1.0)],
            slack: 0,
            substations: vec![Substation { node: 1, branch_elements: vec![0, 1], injection_elements: vec![] }],
            ..Default::default()
        })
        .unwrap();
        let p = compute_ptdf(&g, &retained_rows(&g, &[])).unwrap();
        assert!(matches!(compute_bsdf(&p, &g, 0, &[false, true]), Err(Error::SingularSplit { .. })));
    }

    /// Two substations on a 5-node mesh, split in both orders.
    #[test]
    fn two_splits_commute_and_match_explicit_grid() {
        let branches = vec![
            br("a", 0, 1, 1.0),
            br("b", 1, 2, 2.0),
            br("c", 2, 3, 0.7),
            br("d", 3, 4, 1.3),
            br("e", 4, 0, 0.9),
            br("f", 1, 3, 1.1),
            br("g", 2, 4, 0.6),
            br("h", 1, 4, 2.2),
        ];
        let g = Grid::new(GridParts {
            node_ids: (0..5).map(|i| i.to_string()).collect(),
            branches: branches.clone(),
            slack: 0,
            substations: vec![
                Substation { node: 1, branch_elements: vec![0, 1, 5, 7], injection_elements: vec![] },
                Substation { node: 4, branch_elements: vec![3, 4, 6, 7], injection_elements: vec![] },
            ],
            ..Default::default()
        })
        .unwrap();
        let p = compute_ptdf(&g, &retained_rows(&g, &[])).unwrap();
        let t1 = [true, false, true, false];
        let t2 = [false, true, false, true];

        let s1 = apply_bsdf(&p, &compute_bsdf(&p, &g, 0, &t1).unwrap());
        let s12 = apply_bsdf(&s1, &compute_bsdf(&s1, &g, 1, &t2).unwrap());
        // a, f move 1 -> 5; e, h move 4 -> 6.
        let mut eb = branches;
        eb[0].to = 5;
        eb[5].from = 5;
        eb[4].from = 6;
        eb[7].to = 6;
        let explicit = Grid::new(GridParts {
            node_ids: (0..7).map(|i| i.to_string()).collect(),
            branches: eb,
            slack: 0,
            ..Default::default()
        })
        .unwrap();
        assert_matches(&s12, &explicit, 1e-12);

        // Other order allocates B nodes the other way round.
        let s2 = apply_bsdf(&p, &compute_bsdf(&p, &g, 1, &t2).unwrap());
        let s21 = apply_bsdf(&s2, &compute_bsdf(&s2, &g, 0, &t1).unwrap());
        for node in 0..5 {
            for (x, y) in s12.node_column(node).unwrap().iter().zip(s21.node_column(node).unwrap()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
        for (x, y) in s12.node_column(5).unwrap().iter().zip(s21.node_column(6).unwrap()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn split_at_slack_keeps_slack_column_zero() {
        let mut parts = triangle().into_parts();
        parts.substations.push(Substation { node: 0, branch_elements: vec![0, 2], injection_elements: vec![] });
        let g = Grid::new(parts).unwrap();
        let p = compute_ptdf(&g, &retained_rows(&g, &[])).unwrap();
        let s = apply_bsdf(&p, &compute_bsdf(&p, &g, 0, &[false, true]).unwrap());
        assert!(s.node_column(0).unwrap().iter().all(|&v| v == 0.0));
        let explicit = Grid::new(GridParts {
            node_ids: (0..4).map(|i| i.to_string()).collect(),
            branches: vec![br("e0", 0, 1, 1.0), br("e1", 1, 2, 1.0), br("e2", 3, 2, 1.0)],
            slack: 0,
            ..Default::default()
        })
        .unwrap();
        assert_matches(&s, &explicit, 1e-12);
    }
}
