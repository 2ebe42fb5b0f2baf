//! Batch DC loadflow for topology optimization.
//!
//! The base PTDF of a grid is computed once; every candidate topology
//! (busbar splits, branch disconnections, injection reassignments) and
//! every N-1 contingency is then evaluated through low-rank updates of that
//! matrix instead of refactorizing the network.

pub mod bench;
pub mod error;
pub mod factors;
pub mod fixtures;
pub mod grid;
pub mod oracle;
pub mod solver;
pub mod tree;
pub mod validate;

pub use error::{Error, Result};
pub use grid::{Grid, GridParts};
pub use solver::{solve_batch, BaseCase, SolveConfig, SolveResult, TopologyTask};
