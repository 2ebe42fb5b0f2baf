//! Network data model.
//!
//! A [`Grid`] is immutable once built: [`Grid::new`] validates every
//! cross-reference and the connectivity of the in-service graph, so the
//! rest of the crate can index into it without further checks.

pub(crate) mod graph;
pub mod matpower;
pub mod native;
pub mod reduce;

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use reduce::{replace_stub_branches, static_injection_fold, StaticFold, StubReplacement};

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub id: String,
    pub from: usize,
    pub to: usize,
    /// Per-unit susceptance, strictly positive.
    pub susceptance: f64,
    /// MW rating used for relative loading.
    pub rating: f64,
    pub monitored: bool,
}

impl Branch {
    /// Returns the endpoint opposite to `node`, or `None` if the branch is
    /// not incident on it.
    pub fn far_end(&self, node: usize) -> Option<usize> {
        if self.from == node {
            Some(self.to)
        } else if self.to == node {
            Some(self.from)
        } else {
            None
        }
    }
}

/// Net injection; loads carry a negative setpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Injection {
    pub id: String,
    pub node: usize,
    pub p_mw: f64,
}

/// A substation that can be split into two busbars. Element order defines
/// how boolean topology vectors are read.
#[derive(Debug, Clone, PartialEq)]
pub struct Substation {
    pub node: usize,
    pub branch_elements: Vec<usize>,
    pub injection_elements: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContingencyKind {
    SingleBranch,
    MultiBranch,
    Injection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Contingency {
    pub id: String,
    pub kind: ContingencyKind,
    pub branches: Vec<usize>,
    pub injection: Option<usize>,
}

/// Unvalidated grid contents. Turn into a [`Grid`] with [`Grid::new`].
#[derive(Debug, Clone, Default)]
pub struct GridParts {
    pub node_ids: Vec<String>,
    pub branches: Vec<Branch>,
    pub injections: Vec<Injection>,
    pub slack: usize,
    pub substations: Vec<Substation>,
    pub contingencies: Vec<Contingency>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    node_ids: Vec<String>,
    branches: Vec<Branch>,
    injections: Vec<Injection>,
    slack: usize,
    monitored: Vec<usize>,
    substations: Vec<Substation>,
    contingencies: Vec<Contingency>,
}

impl Grid {
    pub fn new(parts: GridParts) -> Result<Grid> {
        let GridParts {
            node_ids,
            branches,
            injections,
            slack,
            substations,
            contingencies,
        } = parts;
        let n = node_ids.len();
        let invalid = |msg: String| Err(Error::Validation(msg));

        if n == 0 {
            return invalid("grid has no nodes".into());
        }
        let mut seen = HashSet::new();
        for id in &node_ids {
            if !seen.insert(id.as_str()) {
                return invalid(format!("duplicate node id {id:?}"));
            }
        }
        if slack >= n {
            return invalid(format!("slack index {slack} out of range"));
        }

        let mut seen = HashSet::new();
        for br in &branches {
            if !seen.insert(br.id.as_str()) {
                return invalid(format!("duplicate branch id {:?}", br.id));
            }
            if br.from >= n || br.to >= n {
                return invalid(format!("branch {:?} references a missing node", br.id));
            }
            if br.from == br.to {
                return invalid(format!("branch {:?} is a self-loop", br.id));
            }
            if !(br.susceptance.is_finite() && br.susceptance > 0.0) {
                return invalid(format!(
                    "branch {:?} has non-positive or infinite susceptance {}",
                    br.id, br.susceptance
                ));
            }
            if !(br.rating.is_finite() && br.rating > 0.0) {
                return invalid(format!("branch {:?} has invalid rating {}", br.id, br.rating));
            }
        }

        let mut seen = HashSet::new();
        for inj in &injections {
            if !seen.insert(inj.id.as_str()) {
                return invalid(format!("duplicate injection id {:?}", inj.id));
            }
            if inj.node >= n {
                return invalid(format!("injection {:?} references a missing node", inj.id));
            }
            if !inj.p_mw.is_finite() {
                return invalid(format!("injection {:?} has a non-finite setpoint", inj.id));
            }
        }

        let monitored: Vec<usize> = (0..branches.len()).filter(|&i| branches[i].monitored).collect();
        if monitored.is_empty() {
            return invalid("monitored branch set is empty".into());
        }

        let mut sub_nodes = HashSet::new();
        let mut sub_injections = HashSet::new();
        for sub in &substations {
            let name = node_ids.get(sub.node).cloned().unwrap_or_default();
            if sub.node >= n {
                return invalid(format!("substation node {} out of range", sub.node));
            }
            if !sub_nodes.insert(sub.node) {
                return invalid(format!("substation {name:?} listed twice"));
            }
            let mut local = HashSet::new();
            for &b in &sub.branch_elements {
                let br = branches
                    .get(b)
                    .ok_or_else(|| Error::Validation(format!("substation {name:?} references a missing branch")))?;
                if br.far_end(sub.node).is_none() {
                    return invalid(format!("branch {:?} is not incident on substation {name:?}", br.id));
                }
                if !local.insert(b) {
                    return invalid(format!("branch {:?} listed twice in substation {name:?}", br.id));
                }
            }
            for &i in &sub.injection_elements {
                let inj = injections
                    .get(i)
                    .ok_or_else(|| Error::Validation(format!("substation {name:?} references a missing injection")))?;
                if inj.node != sub.node {
                    return invalid(format!("injection {:?} does not sit at substation {name:?}", inj.id));
                }
                if !sub_injections.insert(i) {
                    return invalid(format!("injection {:?} listed twice", inj.id));
                }
            }
        }

        let mut seen = HashSet::new();
        for c in &contingencies {
            if !seen.insert(c.id.as_str()) {
                return invalid(format!("duplicate contingency id {:?}", c.id));
            }
            let mut local = HashSet::new();
            for &b in &c.branches {
                if b >= branches.len() {
                    return invalid(format!("contingency {:?} references a missing branch", c.id));
                }
                if !local.insert(b) {
                    return invalid(format!("contingency {:?} lists a branch twice", c.id));
                }
            }
            match c.kind {
                ContingencyKind::SingleBranch if c.branches.len() != 1 || c.injection.is_some() => {
                    return invalid(format!("single_branch contingency {:?} needs exactly one branch", c.id));
                }
                ContingencyKind::MultiBranch if c.branches.len() < 2 || c.injection.is_some() => {
                    return invalid(format!("multi_branch contingency {:?} needs at least two branches", c.id));
                }
                ContingencyKind::Injection => match c.injection {
                    Some(i) if i < injections.len() && c.branches.is_empty() => {}
                    _ => return invalid(format!("injection contingency {:?} needs one valid injection", c.id)),
                },
                _ => {}
            }
        }

        if !graph::is_connected(n, branches.iter().map(|b| (b.from, b.to))) {
            return invalid("grid is not connected".into());
        }

        Ok(Grid {
            node_ids,
            branches,
            injections,
            slack,
            monitored,
            substations,
            contingencies,
        })
    }

    pub fn into_parts(self) -> GridParts {
        GridParts {
            node_ids: self.node_ids,
            branches: self.branches,
            injections: self.injections,
            slack: self.slack,
            substations: self.substations,
            contingencies: self.contingencies,
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_ids.len()
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn injections(&self) -> &[Injection] {
        &self.injections
    }

    pub fn slack(&self) -> usize {
        self.slack
    }

    pub fn monitored(&self) -> &[usize] {
        &self.monitored
    }

    pub fn substations(&self) -> &[Substation] {
        &self.substations
    }

    pub fn contingencies(&self) -> &[Contingency] {
        &self.contingencies
    }

    /// Net nodal power: the per-node sum of injection setpoints.
    pub fn nodal_power(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.node_count()];
        for inj in &self.injections {
            p[inj.node] += inj.p_mw;
        }
        p
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.node_ids.iter().position(|n| n == id)
    }

    pub fn branch_index(&self, id: &str) -> Option<usize> {
        self.branches.iter().position(|b| b.id == id)
    }

    pub fn substation_index(&self, node_id: &str) -> Option<usize> {
        let node = self.node_index(node_id)?;
        self.substations.iter().position(|s| s.node == node)
    }

    /// Lookup tables from string id to dense index.
    pub fn id_maps(&self) -> IdMaps {
        IdMaps {
            nodes: index_map(self.node_ids.iter()),
            branches: index_map(self.branches.iter().map(|b| &b.id)),
            injections: index_map(self.injections.iter().map(|i| &i.id)),
        }
    }

    /// Injection slots in topology-vector order: every substation's
    /// injection elements, concatenated in substation order.
    pub fn injection_slots(&self) -> Vec<InjectionSlot> {
        let mut slots = Vec::new();
        for (s, sub) in self.substations.iter().enumerate() {
            for &inj in &sub.injection_elements {
                slots.push(InjectionSlot { substation: s, injection: inj });
            }
        }
        slots
    }

    /// Branches whose removal disconnects the grid.
    pub fn bridge_branches(&self) -> Vec<bool> {
        let edges: Vec<_> = self.branches.iter().map(|b| (b.from, b.to)).collect();
        graph::bridges(self.node_count(), &edges)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InjectionSlot {
    pub substation: usize,
    pub injection: usize,
}

#[derive(Debug, Clone, Default)]
pub struct IdMaps {
    pub nodes: HashMap<String, usize>,
    pub branches: HashMap<String, usize>,
    pub injections: HashMap<String, usize>,
}

fn index_map<'a>(ids: impl Iterator<Item = &'a String>) -> HashMap<String, usize> {
    ids.enumerate().map(|(i, id)| (id.clone(), i)).collect()
}
