//! Native JSON grid format. All cross references are string ids; dense
//! indices follow file order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Branch, Contingency, ContingencyKind, Grid, GridParts, Injection, Substation};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    pub nodes: Vec<NodeRecord>,
    pub branches: Vec<BranchRecord>,
    #[serde(default)]
    pub injections: Vec<InjectionRecord>,
    pub slack: String,
    #[serde(default)]
    pub substations: Vec<SubstationRecord>,
    #[serde(default)]
    pub contingencies: Vec<ContingencyRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchRecord {
    pub id: String,
    pub from: String,
    pub to: String,
    pub susceptance: f64,
    pub rating: f64,
    #[serde(default = "default_true")]
    pub monitored: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InjectionRecord {
    pub id: String,
    pub node: String,
    pub p_mw: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubstationRecord {
    pub node: String,
    #[serde(default)]
    pub branch_elements: Vec<String>,
    #[serde(default)]
    pub injection_elements: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContingencyRecord {
    pub id: String,
    pub kind: ContingencyKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub branches: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub injection: Option<String>,
}

fn default_true() -> bool {
    true
}

pub fn load_native(path: impl AsRef<Path>) -> Result<Grid> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json_str(&text)
}

pub fn from_json_str(text: &str) -> Result<Grid> {
    let file: GridFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    from_file(file)
}

pub fn save_native(grid: &Grid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = to_json_string(grid);
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn to_json_string(grid: &Grid) -> String {
    serde_json::to_string_pretty(&to_file(grid)).expect("grid serialization cannot fail")
}

pub fn from_file(file: GridFile) -> Result<Grid> {
    let mut node_ids = Vec::with_capacity(file.nodes.len());
    let mut nodes = std::collections::HashMap::new();
    for (i, n) in file.nodes.into_iter().enumerate() {
        if nodes.insert(n.id.clone(), i).is_some() {
            return Err(Error::Validation(format!("duplicate node id {:?}", n.id)));
        }
        node_ids.push(n.id);
    }
    let node = |id: &str, what: &str| {
        nodes
            .get(id)
            .copied()
            .ok_or_else(|| Error::Validation(format!("{what} references unknown node {id:?}")))
    };

    let mut branches = Vec::with_capacity(file.branches.len());
    for b in &file.branches {
        branches.push(Branch {
            id: b.id.clone(),
            from: node(&b.from, &format!("branch {:?}", b.id))?,
            to: node(&b.to, &format!("branch {:?}", b.id))?,
            susceptance: b.susceptance,
            rating: b.rating,
            monitored: b.monitored,
        });
    }
    let branch_idx: std::collections::HashMap<&str, usize> =
        branches.iter().enumerate().map(|(i, b)| (b.id.as_str(), i)).collect();
    let branch = |id: &str, what: &str| {
        branch_idx
            .get(id)
            .copied()
            .ok_or_else(|| Error::Validation(format!("{what} references unknown branch {id:?}")))
    };

    let mut injections = Vec::with_capacity(file.injections.len());
    for i in &file.injections {
        injections.push(Injection {
            id: i.id.clone(),
            node: node(&i.node, &format!("injection {:?}", i.id))?,
            p_mw: i.p_mw,
        });
    }
    let inj_idx: std::collections::HashMap<&str, usize> =
        injections.iter().enumerate().map(|(k, i)| (i.id.as_str(), k)).collect();
    let injection = |id: &str, what: &str| {
        inj_idx
            .get(id)
            .copied()
            .ok_or_else(|| Error::Validation(format!("{what} references unknown injection {id:?}")))
    };

    let slack = node(&file.slack, "slack")?;

    let mut substations = Vec::with_capacity(file.substations.len());
    for s in &file.substations {
        let what = format!("substation {:?}", s.node);
        substations.push(Substation {
            node: node(&s.node, &what)?,
            branch_elements: s
                .branch_elements
                .iter()
                .map(|b| branch(b, &what))
                .collect::<Result<_>>()?,
            injection_elements: s
                .injection_elements
                .iter()
                .map(|i| injection(i, &what))
                .collect::<Result<_>>()?,
        });
    }

    let mut contingencies = Vec::with_capacity(file.contingencies.len());
    for c in &file.contingencies {
        let what = format!("contingency {:?}", c.id);
        contingencies.push(Contingency {
            id: c.id.clone(),
            kind: c.kind,
            branches: c.branches.iter().map(|b| branch(b, &what)).collect::<Result<_>>()?,
            injection: c.injection.as_deref().map(|i| injection(i, &what)).transpose()?,
        });
    }

    Grid::new(GridParts {
        node_ids,
        branches,
        injections,
        slack,
        substations,
        contingencies,
    })
}

pub fn to_file(grid: &Grid) -> GridFile {
    let nid = |n: usize| grid.node_ids()[n].clone();
    let bid = |b: usize| grid.branches()[b].id.clone();
    let iid = |i: usize| grid.injections()[i].id.clone();
    GridFile {
        nodes: grid.node_ids().iter().map(|id| NodeRecord { id: id.clone() }).collect(),
        branches: grid
            .branches()
            .iter()
            .map(|b| BranchRecord {
                id: b.id.clone(),
                from: nid(b.from),
                to: nid(b.to),
                susceptance: b.susceptance,
                rating: b.rating,
                monitored: b.monitored,
            })
            .collect(),
        injections: grid
            .injections()
            .iter()
            .map(|i| InjectionRecord {
                id: i.id.clone(),
                node: nid(i.node),
                p_mw: i.p_mw,
            })
            .collect(),
        slack: nid(grid.slack()),
        substations: grid
            .substations()
            .iter()
            .map(|s| SubstationRecord {
                node: nid(s.node),
                branch_elements: s.branch_elements.iter().map(|&b| bid(b)).collect(),
                injection_elements: s.injection_elements.iter().map(|&i| iid(i)).collect(),
            })
            .collect(),
        contingencies: grid
            .contingencies()
            .iter()
            .map(|c| ContingencyRecord {
                id: c.id.clone(),
                kind: c.kind,
                branches: c.branches.iter().map(|&b| bid(b)).collect(),
                injection: c.injection.map(iid),
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRIANGLE: &str = r#"{
        "nodes": [{"id": "0"}, {"id": "1"}, {"id": "2"}],
        "branches": [
            {"id": "e0", "from": "0", "to": "1", "susceptance": 1.0, "rating": 100.0, "monitored": true},
            {"id": "e1", "from": "1", "to": "2", "susceptance": 1.0, "rating": 100.0, "monitored": true},
            {"id": "e2", "from": "0", "to": "2", "susceptance": 1.0, "rating": 100.0}
        ],
        "injections": [{"id": "g1", "node": "1", "p_mw": 90.0}],
        "slack": "0",
        "substations": [{"node": "1", "branch_elements": ["e0", "e1"], "injection_elements": ["g1"]}],
        "contingencies": [{"id": "c2", "kind": "single_branch", "branches": ["e2"]}]
    }"#;

    #[test]
    fn loads_triangle_fixture() {
        let g = from_json_str(TRIANGLE).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.branches().len(), 3);
        assert_eq!(g.slack(), 0);
        assert_eq!(g.substations()[0].branch_elements, vec![0, 1]);
        assert_eq!(g.contingencies()[0].branches, vec![2]);
    }

    #[test]
    fn dangling_node_reference_is_validation_error() {
        let bad = TRIANGLE.replace(r#""to": "2", "susceptance": 1.0, "rating": 100.0}"#, r#""to": "X", "susceptance": 1.0, "rating": 100.0}"#);
        assert!(matches!(from_json_str(&bad), Err(Error::Validation(m)) if m.contains("\"X\"")));
    }

    #[test]
    fn malformed_json_is_parse_error() {
        assert!(matches!(from_json_str("{\"nodes\": ["), Err(Error::Parse(_))));
    }

    #[test]
    fn round_trip_preserves_dense_arrays() {
        let g = from_json_str(TRIANGLE).unwrap();
        let again = from_json_str(&to_json_string(&g)).unwrap();
        assert_eq!(g, again);
    }

    #[test]
    fn floats_survive_round_trip_bit_for_bit() {
        let g = crate::fixtures::mesh118();
        let again = from_json_str(&to_json_string(&g)).unwrap();
        assert_eq!(g, again);
        for (a, b) in g.branches().iter().zip(again.branches()) {
            assert_eq!(a.susceptance.to_bits(), b.susceptance.to_bits());
        }
    }
}
