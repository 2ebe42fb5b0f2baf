//! Topology tasks: the in-memory form, the JSON Lines form and the
//! canonical form the kernels consume.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Branch assignment for one substation; `true` puts the element on the
/// new busbar `B`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SplitAction {
    pub substation: usize,
    pub branch_assignment: Vec<bool>,
}

/// One candidate topology: splits `t_b`, disconnections `t_d` and the set
/// of injection assignments `T_i` to bruteforce. Each injection assignment
/// has one bit per injection slot (see [`Grid::injection_slots`]); a `true`
/// bit moves the injection to busbar `B` of its substation, which only has
/// an effect if that substation is split.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TopologyTask {
    pub splits: Vec<SplitAction>,
    pub disconnections: Vec<usize>,
    pub injection_sets: Vec<Vec<bool>>,
}

impl TopologyTask {
    /// The unsplit grid with a single all-`A` injection assignment.
    pub fn identity(grid: &Grid) -> Self {
        TopologyTask {
            splits: Vec::new(),
            disconnections: Vec::new(),
            injection_sets: vec![vec![false; injection_slot_count(grid)]],
        }
    }

    /// Builds a task from a dense branch topology vector over all
    /// substations (concatenated in substation order). Substations without
    /// a `true` bit are not split.
    pub fn from_dense(grid: &Grid, t_b: &[bool], disconnections: Vec<usize>, injection_sets: Vec<Vec<bool>>) -> Result<Self> {
        let total: usize = grid.substations().iter().map(|s| s.branch_elements.len()).sum();
        if t_b.len() != total {
            return Err(Error::InvalidTask(format!("branch topology has {} bits, expected {total}", t_b.len())));
        }
        let mut splits = Vec::new();
        let mut off = 0;
        for (s, sub) in grid.substations().iter().enumerate() {
            let bits = &t_b[off..off + sub.branch_elements.len()];
            off += bits.len();
            if bits.iter().any(|&b| b) {
                splits.push(SplitAction { substation: s, branch_assignment: bits.to_vec() });
            }
        }
        Ok(TopologyTask { splits, disconnections, injection_sets })
    }
}

pub(crate) fn injection_slot_count(grid: &Grid) -> usize {
    grid.substations().iter().map(|s| s.injection_elements.len()).sum()
}

/// Validated task with splits sorted by substation and identity splits
/// removed.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalTask {
    pub splits: Vec<SplitAction>,
    pub disconnections: Vec<usize>,
    pub injection_sets: Vec<Vec<bool>>,
}

pub fn canonicalize(task: &TopologyTask, grid: &Grid) -> Result<CanonicalTask> {
    let subs = grid.substations();
    let mut splits = Vec::with_capacity(task.splits.len());
    let mut seen = vec![false; subs.len()];
    for s in &task.splits {
        let sub = subs
            .get(s.substation)
            .ok_or_else(|| Error::InvalidTask(format!("substation index {} out of range", s.substation)))?;
        if std::mem::replace(&mut seen[s.substation], true) {
            return Err(Error::InvalidTask(format!(
                "substation {:?} split twice",
                grid.node_ids()[sub.node]
            )));
        }
        if s.branch_assignment.len() != sub.branch_elements.len() {
            return Err(Error::InvalidTask(format!(
                "substation {:?} expects {} branch bits, got {}",
                grid.node_ids()[sub.node],
                sub.branch_elements.len(),
                s.branch_assignment.len()
            )));
        }
        if s.branch_assignment.iter().any(|&b| b) {
            splits.push(s.clone());
        }
    }
    splits.sort();

    let mut disc = task.disconnections.clone();
    for &b in &disc {
        if b >= grid.branches().len() {
            return Err(Error::InvalidTask(format!("disconnection index {b} out of range")));
        }
    }
    disc.sort_unstable();
    if disc.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidTask("duplicate disconnection".into()));
    }

    let slots = injection_slot_count(grid);
    if task.injection_sets.is_empty() {
        return Err(Error::InvalidTask("injection set is empty".into()));
    }
    if let Some(bad) = task.injection_sets.iter().find(|t| t.len() != slots) {
        return Err(Error::InvalidTask(format!(
            "injection assignment has {} bits, expected {slots}",
            bad.len()
        )));
    }
    Ok(CanonicalTask {
        splits,
        disconnections: disc,
        injection_sets: task.injection_sets.clone(),
    })
}

/// Drops injection assignments that only differ by swapping equal-setpoint
/// injections of the same substation between busbars. Returns the reduced
/// task and, for every kept assignment, its index in the original set.
/// The first assignment of every equivalence class is kept, so the lowest
/// index still wins ties.
pub fn dedupe_symmetric_injections(task: &TopologyTask, grid: &Grid) -> (TopologyTask, Vec<usize>) {
    let slots = grid.injection_slots();
    let mut seen: HashMap<Vec<(usize, u64, usize)>, ()> = HashMap::new();
    let mut kept = Vec::new();
    let mut sets = Vec::new();
    for (k, t_i) in task.injection_sets.iter().enumerate() {
        // Per substation and setpoint: how many of those injections sit on B.
        let mut counts: HashMap<(usize, u64), usize> = HashMap::new();
        for (slot, &on_b) in slots.iter().zip(t_i) {
            let p = grid.injections()[slot.injection].p_mw;
            *counts.entry((slot.substation, p.to_bits())).or_default() += on_b as usize;
        }
        let mut key: Vec<(usize, u64, usize)> = counts.into_iter().map(|((s, p), c)| (s, p, c)).collect();
        key.sort_unstable();
        if t_i.len() != slots.len() || seen.insert(key, ()).is_none() {
            kept.push(k);
            sets.push(t_i.clone());
        }
    }
    (
        TopologyTask {
            splits: task.splits.clone(),
            disconnections: task.disconnections.clone(),
            injection_sets: sets,
        },
        kept,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitRecord {
    pub substation: String,
    pub branch_assignment: Vec<bool>,
}

/// One line of a task file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskRecord {
    #[serde(default)]
    pub splits: Vec<SplitRecord>,
    #[serde(default)]
    pub disconnections: Vec<String>,
    #[serde(default)]
    pub injection_sets: Vec<Vec<bool>>,
}

/// Resolves ids. An absent or empty `injection_sets` means the single
/// all-`A` assignment.
pub fn task_from_record(rec: &TaskRecord, grid: &Grid) -> Result<TopologyTask> {
    let mut splits = Vec::with_capacity(rec.splits.len());
    for s in &rec.splits {
        let idx = grid
            .substation_index(&s.substation)
            .ok_or_else(|| Error::Validation(format!("unknown substation {:?}", s.substation)))?;
        splits.push(SplitAction { substation: idx, branch_assignment: s.branch_assignment.clone() });
    }
    let mut disconnections = Vec::with_capacity(rec.disconnections.len());
    for id in &rec.disconnections {
        disconnections.push(
            grid.branch_index(id)
                .ok_or_else(|| Error::Validation(format!("unknown branch {id:?}")))?,
        );
    }
    let injection_sets = if rec.injection_sets.is_empty() {
        vec![vec![false; injection_slot_count(grid)]]
    } else {
        rec.injection_sets.clone()
    };
    Ok(TopologyTask { splits, disconnections, injection_sets })
}

pub fn task_to_record(task: &TopologyTask, grid: &Grid) -> TaskRecord {
    TaskRecord {
        splits: task
            .splits
            .iter()
            .map(|s| SplitRecord {
                substation: grid.node_ids()[grid.substations()[s.substation].node].clone(),
                branch_assignment: s.branch_assignment.clone(),
            })
            .collect(),
        disconnections: task.disconnections.iter().map(|&b| grid.branches()[b].id.clone()).collect(),
        injection_sets: task.injection_sets.clone(),
    }
}

/// Reads a JSON Lines task file; blank lines are skipped.
pub fn read_tasks(path: impl AsRef<Path>, grid: &Grid) -> Result<Vec<TopologyTask>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut tasks = Vec::new();
    for (n, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TaskRecord =
            serde_json::from_str(&line).map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)))?;
        tasks.push(task_from_record(&rec, grid).map_err(|e| Error::Validation(format!("line {}: {e}", n + 1)))?);
    }
    Ok(tasks)
}

pub fn write_tasks(path: impl AsRef<Path>, tasks: &[TopologyTask], grid: &Grid) -> Result<()> {
    let path = path.as_ref();
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    for t in tasks {
        let line = serde_json::to_string(&task_to_record(t, grid)).expect("task serialization cannot fail");
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Branch, GridParts, Injection, Substation};

    fn grid() -> Grid {
        let br = |id: &str, f, t| Branch { id: id.into(), from: f, to: t, susceptance: 1.0, rating: 100.0, monitored: true };
        Grid::new(GridParts {
            node_ids: (0..4).map(|i| i.to_string()).collect(),
            branches: vec![br("a", 0, 1), br("b", 1, 2), br("c", 2, 3), br("d", 3, 0), br("e", 1, 3)],
            injections: vec![
                Injection { id: "g1".into(), node: 1, p_mw: 100.0 },
                Injection { id: "g2".into(), node: 1, p_mw: 100.0 },
                Injection { id: "l".into(), node: 2, p_mw: -200.0 },
            ],
            slack: 0,
            substations: vec![Substation { node: 1, branch_elements: vec![0, 1, 4], injection_elements: vec![0, 1] }],
            contingencies: vec![],
        })
        .unwrap()
    }

    fn all_pairs() -> Vec<Vec<bool>> {
        vec![vec![false, false], vec![true, false], vec![false, true], vec![true, true]]
    }

    #[test]
    fn symmetric_generators_collapse() {
        let g = grid();
        let task = TopologyTask { injection_sets: all_pairs(), ..Default::default() };
        let (d, kept) = dedupe_symmetric_injections(&task, &g);
        assert_eq!(kept, vec![0, 1, 3]);
        assert_eq!(d.injection_sets.len(), 3);
    }

    #[test]
    fn distinct_setpoints_are_kept() {
        let mut parts = grid().into_parts();
        parts.injections[1].p_mw = 80.0;
        let g = Grid::new(parts).unwrap();
        let task = TopologyTask { injection_sets: all_pairs(), ..Default::default() };
        let (d, kept) = dedupe_symmetric_injections(&task, &g);
        assert_eq!(kept, vec![0, 1, 2, 3]);
        assert_eq!(d, task);
    }

    #[test]
    fn canonical_form_drops_identity_splits() {
        let g = grid();
        let t = TopologyTask {
            splits: vec![SplitAction { substation: 0, branch_assignment: vec![false; 3] }],
            injection_sets: vec![vec![false, false]],
            ..Default::default()
        };
        assert!(canonicalize(&t, &g).unwrap().splits.is_empty());
    }

    #[test]
    fn malformed_tasks_are_rejected() {
        let g = grid();
        let t = TopologyTask {
            splits: vec![SplitAction { substation: 0, branch_assignment: vec![true] }],
            injection_sets: vec![vec![false, false]],
            ..Default::default()
        };
        assert!(matches!(canonicalize(&t, &g), Err(Error::InvalidTask(_))));
        let t = TopologyTask { disconnections: vec![1, 1], injection_sets: vec![vec![false, false]], ..Default::default() };
        assert!(canonicalize(&t, &g).is_err());
        let t = TopologyTask { injection_sets: vec![vec![false]], ..Default::default() };
        assert!(canonicalize(&t, &g).is_err());
    }

    #[test]
    fn dense_topology_vector_round_trip() {
        let g = grid();
        let t = TopologyTask::from_dense(&g, &[true, false, true], vec![2], vec![vec![true, false]]).unwrap();
        assert_eq!(t.splits, vec![SplitAction { substation: 0, branch_assignment: vec![true, false, true] }]);
        let rec = task_to_record(&t, &g);
        assert_eq!(rec.splits[0].substation, "1");
        assert_eq!(rec.disconnections, vec!["c"]);
        assert_eq!(task_from_record(&rec, &g).unwrap(), t);
        assert!(TopologyTask::from_dense(&g, &[true], vec![], vec![]).is_err());
    }

    #[test]
    fn jsonl_round_trip() {
        let g = grid();
        let tasks = vec![
            TopologyTask::identity(&g),
            TopologyTask::from_dense(&g, &[true, true, false], vec![], all_pairs()).unwrap(),
        ];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.jsonl");
        write_tasks(&p, &tasks, &g).unwrap();
        assert_eq!(read_tasks(&p, &g).unwrap(), tasks);
        std::fs::write(&p, "{\"splits\": [{\"substation\": \"9\", \"branch_assignment\": []}]}\n").unwrap();
        assert!(matches!(read_tasks(&p, &g), Err(Error::Validation(_))));
    }
}
