//! Single-branch outages.

use super::{AppliedUpdate, PtdfMatrix, ISLANDING_TOL};
use crate::error::{Error, Result};

impl PtdfMatrix {
    /// Row and endpoint columns of `branch` under the current topology.
    pub(crate) fn outage_handles(&self, branch: usize) -> Result<(usize, usize, usize)> {
        let id = || self.layout.branch_ids.get(branch).cloned().unwrap_or_else(|| branch.to_string());
        let row = self
            .branch_row(branch)
            .ok_or_else(|| Error::InvalidTask(format!("branch {:?} has no retained row", id())))?;
        let (f, t) = self.ends[branch];
        match (self.node_col(f), self.node_col(t)) {
            (Some(cf), Some(ct)) => Ok((row, cf, ct)),
            _ => Err(Error::InvalidTask(format!(
                "endpoints of branch {:?} were folded into the static column",
                id()
            ))),
        }
    }

    /// `PTDF[:, f] - PTDF[:, t]` for the current endpoints of a branch.
    pub(crate) fn transfer_column(&self, cf: usize, ct: usize) -> Vec<f64> {
        self.column(cf).iter().zip(self.column(ct)).map(|(a, b)| a - b).collect()
    }
}

/// LODF column of branch `k` over all retained rows. The self entry is set
/// to exactly -1.
pub fn lodf_column(ptdf: &PtdfMatrix, k: usize) -> Result<Vec<f64>> {
    let (row, cf, ct) = ptdf.outage_handles(k)?;
    let mut col = ptdf.transfer_column(cf, ct);
    let den = 1.0 - col[row];
    if den.abs() < ISLANDING_TOL {
        return Err(Error::Islanding {
            branches: vec![ptdf.branch_id(k).to_string()],
        });
    }
    for v in col.iter_mut() {
        *v /= den;
    }
    col[row] = -1.0;
    Ok(col)
}

/// `p + LODF[:, k] * p[k]`, with the outaged entry (at `row`) forced to 0.
pub fn apply_outage_to_flows(base_flows: &[f64], lodf_col: &[f64], row: usize) -> Vec<f64> {
    let mut flows = base_flows.to_vec();
    let pk = base_flows[row];
    if pk != 0.0 {
        super::axpy(pk, lodf_col, &mut flows);
    }
    flows[row] = 0.0;
    flows
}

/// `PTDF + LODF[:, k] · PTDF[k, :]`; row `k` of the result is exactly zero.
pub fn apply_outage_to_ptdf(ptdf: &PtdfMatrix, lodf_col: &[f64], k: usize) -> Result<PtdfMatrix> {
    let (row, _, _) = ptdf.outage_handles(k)?;
    let rows = ptdf.rows;
    let mut values = ptdf.values.clone();
    for c in 0..ptdf.cols {
        let col = &mut values[c * rows..(c + 1) * rows];
        let pk = col[row];
        if pk != 0.0 {
            super::axpy(pk, lodf_col, col);
        }
        col[row] = 0.0;
    }
    let mut out = ptdf.with_values(values);
    out.applied.push(AppliedUpdate::Outage { branches: vec![k] });
    Ok(out)
}
