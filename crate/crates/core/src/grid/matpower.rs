//! One-way import of MATPOWER case files (`mpc.bus`, `mpc.gen`,
//! `mpc.branch`). Only what the DC model needs is read: reactance,
//! ratings, status flags, active power.

use std::collections::HashMap;
use std::path::Path;

use super::{Branch, Contingency, ContingencyKind, Grid, GridParts, Injection, Substation};
use crate::error::{Error, Result};

// Column positions (0-based) in the MATPOWER tables.
const BUS_I: usize = 0;
const BUS_TYPE: usize = 1;
const PD: usize = 2;
const GEN_BUS: usize = 0;
const PG: usize = 1;
const GEN_STATUS: usize = 7;
const F_BUS: usize = 0;
const T_BUS: usize = 1;
const BR_X: usize = 3;
const RATE_A: usize = 5;
const BR_STATUS: usize = 10;

const REF_BUS: f64 = 3.0;
const ISOLATED_BUS: f64 = 4.0;

/// Rating given to branches whose RATE_A is 0 (unlimited in MATPOWER).
pub const UNLIMITED_RATING_MW: f64 = 9900.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ContingencyPolicy {
    #[default]
    None,
    AllBranches,
    /// Every branch that is not a bridge of the imported grid.
    NonBridge,
}

#[derive(Debug, Clone, Default)]
pub struct ImportOptions {
    /// Number of switchable substations to designate (highest degree first).
    pub switchable: usize,
    pub contingencies: ContingencyPolicy,
    /// Add an injection outage for every generator with positive output.
    pub gen_outages: bool,
}

#[derive(Debug, Clone)]
pub struct MatpowerImport {
    pub grid: Grid,
    pub notes: Vec<String>,
}

pub fn import_matpower(path: impl AsRef<Path>) -> Result<Grid> {
    Ok(import_matpower_with(path, &ImportOptions::default())?.grid)
}

pub fn import_matpower_with(path: impl AsRef<Path>, opts: &ImportOptions) -> Result<MatpowerImport> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matpower(&text, opts)
}

pub fn parse_matpower(text: &str, opts: &ImportOptions) -> Result<MatpowerImport> {
    let tables = parse_tables(text)?;
    if let Some(rows) = tables.get("dcline") {
        if let Some(first) = rows.first() {
            return Err(Error::UnsupportedFeature(format!(
                "DC line from bus {} to bus {}",
                fmt_bus(first[0]),
                fmt_bus(first[1])
            )));
        }
    }
    let table = |name: &str, min_cols: usize| -> Result<&Vec<Vec<f64>>> {
        let rows = tables
            .get(name)
            .ok_or_else(|| Error::Parse(format!("missing mpc.{name} table")))?;
        if let Some((i, _)) = rows.iter().enumerate().find(|(_, r)| r.len() < min_cols) {
            return Err(Error::Parse(format!(
                "mpc.{name} row {} has fewer than {min_cols} columns",
                i + 1
            )));
        }
        Ok(rows)
    };
    let bus = table("bus", 3)?;
    let gen = table("gen", 8)?;
    let branch = table("branch", 11)?;

    let mut notes = Vec::new();
    let mut node_ids = Vec::new();
    let mut bus_index = HashMap::new();
    let mut slack = None;
    for row in bus {
        if row[BUS_TYPE] == ISOLATED_BUS {
            continue;
        }
        let id = fmt_bus(row[BUS_I]);
        let idx = node_ids.len();
        if bus_index.insert(id.clone(), idx).is_some() {
            return Err(Error::Parse(format!("duplicate bus number {id}")));
        }
        if row[BUS_TYPE] == REF_BUS {
            if slack.is_some() {
                notes.push(format!("additional reference bus {id} treated as PV"));
            } else {
                slack = Some(idx);
            }
        }
        node_ids.push(id);
    }
    let slack = slack.ok_or_else(|| Error::Validation("case has no reference bus".into()))?;
    let lookup = |v: f64, what: &str| {
        bus_index
            .get(&fmt_bus(v))
            .copied()
            .ok_or_else(|| Error::Validation(format!("{what} references unknown or isolated bus {}", fmt_bus(v))))
    };

    let mut branches = Vec::new();
    for (k, row) in branch.iter().enumerate() {
        let id = format!("L{}", k + 1);
        if row[BR_STATUS] == 0.0 {
            continue;
        }
        let x = row[BR_X];
        if x == 0.0 {
            return Err(Error::Validation(format!("branch {id} has zero reactance (infinite susceptance)")));
        }
        if x < 0.0 {
            notes.push(format!("branch {id} has negative reactance {x}; using |x|"));
        }
        let rating = if row[RATE_A] > 0.0 { row[RATE_A] } else { UNLIMITED_RATING_MW };
        branches.push(Branch {
            from: lookup(row[F_BUS], &id)?,
            to: lookup(row[T_BUS], &id)?,
            id,
            susceptance: 1.0 / x.abs(),
            rating,
            monitored: true,
        });
    }

    let mut injections = Vec::new();
    for row in bus {
        if row[BUS_TYPE] == ISOLATED_BUS || row[PD] == 0.0 {
            continue;
        }
        let id = fmt_bus(row[BUS_I]);
        injections.push(Injection {
            node: lookup(row[BUS_I], "load")?,
            id: format!("load_{id}"),
            p_mw: -row[PD],
        });
    }
    let first_gen = injections.len();
    for (k, row) in gen.iter().enumerate() {
        if row[GEN_STATUS] <= 0.0 {
            continue;
        }
        let id = format!("gen_{}", k + 1);
        injections.push(Injection {
            node: lookup(row[GEN_BUS], &id)?,
            id,
            p_mw: row[PG],
        });
    }

    let mut parts = GridParts {
        node_ids,
        branches,
        injections,
        slack,
        substations: Vec::new(),
        contingencies: Vec::new(),
    };
    // Validate the raw network first so bridge detection runs on a
    // connected graph.
    let base = Grid::new(parts.clone())?;

    parts.substations = pick_switchable(&base, opts.switchable);
    let bridges = base.bridge_branches();
    for (b, br) in base.branches().iter().enumerate() {
        let take = match opts.contingencies {
            ContingencyPolicy::None => false,
            ContingencyPolicy::AllBranches => true,
            ContingencyPolicy::NonBridge => !bridges[b],
        };
        if take {
            parts.contingencies.push(Contingency {
                id: format!("n1_{}", br.id),
                kind: ContingencyKind::SingleBranch,
                branches: vec![b],
                injection: None,
            });
        }
    }
    if opts.gen_outages {
        for (i, inj) in base.injections().iter().enumerate().skip(first_gen) {
            if inj.p_mw > 0.0 {
                parts.contingencies.push(Contingency {
                    id: format!("n1_{}", inj.id),
                    kind: ContingencyKind::Injection,
                    branches: Vec::new(),
                    injection: Some(i),
                });
            }
        }
    }

    Ok(MatpowerImport {
        grid: Grid::new(parts)?,
        notes,
    })
}

/// Designates up to `count` switchable substations: non-slack nodes with at
/// least three incident branches, highest degree first, ties by index.
pub fn pick_switchable(grid: &Grid, count: usize) -> Vec<Substation> {
    let n = grid.node_count();
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (b, br) in grid.branches().iter().enumerate() {
        incident[br.from].push(b);
        incident[br.to].push(b);
    }
    let mut candidates: Vec<usize> = (0..n)
        .filter(|&v| v != grid.slack() && incident[v].len() >= 3)
        .collect();
    candidates.sort_by_key(|&v| (std::cmp::Reverse(incident[v].len()), v));
    candidates.truncate(count);
    candidates.sort_unstable();
    candidates
        .into_iter()
        .map(|v| Substation {
            node: v,
            branch_elements: incident[v].clone(),
            injection_elements: (0..grid.injections().len())
                .filter(|&i| grid.injections()[i].node == v)
                .collect(),
        })
        .collect()
}

fn fmt_bus(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Extracts every `mpc.<name> = [ ... ];` numeric matrix.
fn parse_tables(text: &str) -> Result<HashMap<String, Vec<Vec<f64>>>> {
    let mut cleaned = String::with_capacity(text.len());
    for line in text.lines() {
        let line = match line.find('%') {
            Some(p) => &line[..p],
            None => line,
        };
        cleaned.push_str(line);
        cleaned.push('\n');
    }

    let mut tables = HashMap::new();
    let mut rest = cleaned.as_str();
    while let Some(pos) = rest.find("mpc.") {
        rest = &rest[pos + 4..];
        let name_end = rest
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(rest.len());
        let name = rest[..name_end].to_string();
        let after = rest[name_end..].trim_start();
        let Some(after_eq) = after.strip_prefix('=') else {
            continue;
        };
        let after_eq = after_eq.trim_start();
        let Some(body_start) = after_eq.strip_prefix('[') else {
            continue;
        };
        let close = body_start
            .find(']')
            .ok_or_else(|| Error::Parse(format!("unterminated matrix mpc.{name}")))?;
        let body = &body_start[..close];
        let mut rows = Vec::new();
        for raw in body.split([';', '\n']) {
            let raw = raw.trim();
            if raw.is_empty() {
                continue;
            }
            let row = raw
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .map(|t| parse_number(t).ok_or_else(|| Error::Parse(format!("bad number {t:?} in mpc.{name}"))))
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        tables.insert(name, rows);
        rest = &body_start[close..];
    }
    Ok(tables)
}

fn parse_number(t: &str) -> Option<f64> {
    match t {
        "Inf" | "inf" => Some(f64::INFINITY),
        "-Inf" | "-inf" => Some(f64::NEG_INFINITY),
        _ => t.parse().ok(),
    }
}
