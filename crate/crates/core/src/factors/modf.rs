//! Simultaneous multi-branch outages.

use super::lu::Lu;
use super::{AppliedUpdate, PtdfMatrix, ISLANDING_TOL};
use crate::error::{Error, Result};

/// Default cap on simultaneous outages in one MODF system.
pub const MAX_SIMULTANEOUS_OUTAGES: usize = 8;

/// Retained rows × outages, column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ModfMatrix {
    values: Vec<f64>,
    rows: usize,
    outages: Vec<usize>,
    outage_rows: Vec<usize>,
}

impl ModfMatrix {
    pub fn outages(&self) -> &[usize] {
        &self.outages
    }

    pub fn outage_rows(&self) -> &[usize] {
        &self.outage_rows
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.values[j * self.rows..(j + 1) * self.rows]
    }

    pub fn get(&self, row: usize, j: usize) -> f64 {
        self.values[j * self.rows + row]
    }
}

/// Builds the MODF for the outage set by solving
/// `MODF · (I - F[O, :]) = F` with `F = PTDF[:, f_O] - PTDF[:, t_O]`, then
/// forces the outaged rows to `-1` on the diagonal and `0` elsewhere.
pub fn compute_modf(ptdf: &PtdfMatrix, outages: &[usize]) -> Result<ModfMatrix> {
    if outages.is_empty() {
        return Err(Error::InvalidTask("empty outage set".into()));
    }
    let n = outages.len();
    if n > MAX_SIMULTANEOUS_OUTAGES {
        return Err(Error::InvalidTask(format!(
            "{n} simultaneous outages exceed the cap of {MAX_SIMULTANEOUS_OUTAGES}"
        )));
    }
    let rows = ptdf.rows();
    let mut f = Vec::with_capacity(rows * n);
    let mut outage_rows = Vec::with_capacity(n);
    for &k in outages {
        let (row, cf, ct) = ptdf.outage_handles(k)?;
        if outage_rows.contains(&row) {
            return Err(Error::InvalidTask(format!("branch {:?} listed twice", ptdf.branch_id(k))));
        }
        outage_rows.push(row);
        f.extend(ptdf.transfer_column(cf, ct));
    }
    // MODF = F · (I - D)^-1; the system is tiny, so form the inverse.
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let d = f[j * rows + outage_rows[i]];
            m[i * n + j] = if i == j { 1.0 - d } else { -d };
        }
    }
    let lu = Lu::factor(m, n, ISLANDING_TOL).ok_or_else(|| Error::Islanding {
        branches: outages.iter().map(|&k| ptdf.branch_id(k).to_string()).collect(),
    })?;
    let inv = lu.inverse();
    let mut values = vec![0.0; rows * n];
    for j in 0..n {
        let out = &mut values[j * rows..(j + 1) * rows];
        for k in 0..n {
            let w = inv[k * n + j];
            if w != 0.0 {
                super::axpy(w, &f[k * rows..(k + 1) * rows], out);
            }
        }
    }
    for (i, &r) in outage_rows.iter().enumerate() {
        for j in 0..n {
            values[j * rows + r] = if i == j { -1.0 } else { 0.0 };
        }
    }
    Ok(ModfMatrix {
        values,
        rows,
        outages: outages.to_vec(),
        outage_rows,
    })
}

/// `p + MODF · p[O]`.
pub fn apply_modf_to_flows(base_flows: &[f64], modf: &ModfMatrix) -> Vec<f64> {
    let mut flows = base_flows.to_vec();
    for (j, &r) in modf.outage_rows.iter().enumerate() {
        let pk = base_flows[r];
        if pk != 0.0 {
            super::axpy(pk, modf.column(j), &mut flows);
        }
    }
    for &r in &modf.outage_rows {
        flows[r] = 0.0;
    }
    flows
}

/// `PTDF + MODF · PTDF[O, :]`.
pub fn apply_modf_to_ptdf(ptdf: &PtdfMatrix, modf: &ModfMatrix) -> PtdfMatrix {
    let rows = ptdf.rows;
    let mut values = ptdf.values.clone();
    for c in 0..ptdf.cols {
        let col = &mut values[c * rows..(c + 1) * rows];
        let weights: Vec<f64> = modf.outage_rows.iter().map(|&r| col[r]).collect();
        for (j, &w) in weights.iter().enumerate() {
            if w != 0.0 {
                super::axpy(w, modf.column(j), col);
            }
        }
        for &r in &modf.outage_rows {
            col[r] = 0.0;
        }
    }
    let mut out = ptdf.with_values(values);
    out.applied.push(AppliedUpdate::Outage {
        branches: modf.outages.clone(),
    });
    out
}
