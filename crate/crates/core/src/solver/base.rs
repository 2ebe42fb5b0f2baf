//! Per-grid precomputation shared by every task.

use crate::error::{Error, Result};
use crate::factors::{compute_ptdf, reduce_static, retained_rows, PtdfMatrix};
use crate::grid::{static_injection_fold, Grid, StaticFold};

#[derive(Debug, Clone, Default)]
pub struct BaseOptions {
    /// Branches that tasks may disconnect. They must keep a PTDF row and
    /// endpoint columns, so they have to be declared up front.
    pub disconnectable: Vec<usize>,
    /// Skip folding static nodes into one column (debugging aid).
    pub keep_static_columns: bool,
}

/// Grid plus the base PTDF (factorized once), reduced to the columns the
/// solver can ever touch.
#[derive(Debug, Clone)]
pub struct BaseCase {
    pub(crate) grid: Grid,
    pub(crate) ptdf: PtdfMatrix,
    pub(crate) fold: StaticFold,
    /// Rating of every monitored row.
    pub(crate) ratings: Vec<f64>,
    pub(crate) inv_ratings: Vec<f64>,
    /// Injection slot offset of every substation.
    pub(crate) slot_offset: Vec<usize>,
    pub(crate) slot_count: usize,
    /// Setpoint of the injection in every slot.
    pub(crate) slot_power: Vec<f64>,
}

impl BaseCase {
    pub fn new(grid: Grid) -> Result<Self> {
        Self::with_options(grid, &BaseOptions::default())
    }

    pub fn with_options(grid: Grid, opts: &BaseOptions) -> Result<Self> {
        if let Some(&b) = opts.disconnectable.iter().find(|&&b| b >= grid.branches().len()) {
            return Err(Error::InvalidConfig(format!("disconnectable branch index {b} out of range")));
        }
        let rows = retained_rows(&grid, &opts.disconnectable);
        let full = compute_ptdf(&grid, &rows)?;
        let mut fold = static_injection_fold(&grid, &opts.disconnectable);
        if opts.keep_static_columns {
            fold.effective_nodes = (0..grid.node_count()).collect();
            fold.static_nodes.clear();
        }
        let ptdf = reduce_static(&full, &grid, &fold.static_nodes, &grid.nodal_power())?;
        let ratings: Vec<f64> = grid.monitored().iter().map(|&b| grid.branches()[b].rating).collect();
        let inv_ratings = ratings.iter().map(|r| 1.0 / r).collect();
        let mut slot_offset = Vec::with_capacity(grid.substations().len());
        let mut off = 0;
        for s in grid.substations() {
            slot_offset.push(off);
            off += s.injection_elements.len();
        }
        Ok(BaseCase {
            ptdf,
            fold,
            ratings,
            inv_ratings,
            slot_offset,
            slot_count: off,
            slot_power: grid.injection_slots().iter().map(|s| grid.injections()[s.injection].p_mw).collect(),
            grid,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// The reduced base PTDF.
    pub fn ptdf(&self) -> &PtdfMatrix {
        &self.ptdf
    }

    pub fn static_fold(&self) -> &StaticFold {
        &self.fold
    }

    pub fn monitored_ratings(&self) -> &[f64] {
        &self.ratings
    }

    /// Length of every injection assignment vector.
    pub fn injection_slot_count(&self) -> usize {
        self.slot_count
    }

    /// Length of the dense branch topology vector.
    pub fn branch_slot_count(&self) -> usize {
        self.grid.substations().iter().map(|s| s.branch_elements.len()).sum()
    }
}
