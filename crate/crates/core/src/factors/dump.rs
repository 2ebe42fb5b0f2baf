//! PTDF dump: a row-major little-endian `f64` matrix plus a JSON sidecar
//! naming rows (branch ids) and columns (node ids).

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{AppliedUpdate, ColumnKey, PtdfMatrix};
use crate::error::{Error, Result};

/// Column label of the folded static flows.
pub const STATIC_COLUMN: &str = "__static__";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpSidecar {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub monitored_rows: usize,
    pub dtype: String,
    pub order: String,
}

/// Sidecar path for a dump file: `<path>.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Column labels. Split nodes are named `<substation id>#B`.
pub fn column_labels(ptdf: &PtdfMatrix, node_ids: &[String]) -> Vec<String> {
    let mut names: Vec<String> = node_ids.to_vec();
    names.resize(ptdf.node_count(), String::new());
    for u in ptdf.applied_updates() {
        if let AppliedUpdate::Split { node, new_node, .. } = u {
            names[*new_node] = format!("{}#B", names[*node]);
        }
    }
    (0..ptdf.cols())
        .map(|c| match ptdf.column_key(c) {
            ColumnKey::Node(n) => names[n].clone(),
            ColumnKey::Static => STATIC_COLUMN.to_string(),
        })
        .collect()
}

pub fn write_dump(ptdf: &PtdfMatrix, node_ids: &[String], path: &Path) -> Result<DumpSidecar> {
    let mut buf = Vec::with_capacity(ptdf.rows() * ptdf.cols() * 8);
    for r in 0..ptdf.rows() {
        for c in 0..ptdf.cols() {
            buf.extend_from_slice(&ptdf.get(r, c).to_le_bytes());
        }
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))?;
    let sidecar = DumpSidecar {
        rows: ptdf.row_branches().iter().map(|&b| ptdf.branch_id(b).to_string()).collect(),
        cols: column_labels(ptdf, node_ids),
        monitored_rows: ptdf.monitored_rows(),
        dtype: "f64le".into(),
        order: "row_major".into(),
    };
    let side = sidecar_path(path);
    let text = serde_json::to_string_pretty(&sidecar).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(&side, text).map_err(|e| Error::io(&side, e))?;
    Ok(sidecar)
}

/// Reads a dump back as `(sidecar, row-major values)`.
pub fn read_dump(path: &Path) -> Result<(DumpSidecar, Vec<f64>)> {
    let side = sidecar_path(path);
    let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let sidecar: DumpSidecar = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let expected = sidecar.rows.len() * sidecar.cols.len() * 8;
    if bytes.len() != expected {
        return Err(Error::Parse(format!("dump holds {} bytes, sidecar implies {expected}", bytes.len())));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((sidecar, values))
}
