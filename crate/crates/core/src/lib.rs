//! DC power flow under topology changes via the extended superposition theorem.
//!
//! The crate models a node-breaker grid of substations with two busbars and a
//! coupler, solves the DC power flow, and combines single-change ("unitary")
//! states into the flows of a multi-change topology.

// `!(x <= tol)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod case_io;
pub mod cli;
pub mod dc;
pub mod dense;
pub mod error;
pub mod grid;
pub mod sampling;
pub mod security;
pub mod superposition;

pub use dc::{lodf, solve_dc, DcSolver, LodfRow, SolvedState};
pub use error::{CaseError, DcError, GridError, StError};
pub use grid::{
    BranchIdx, BranchStatus, Busbar, BusbarAssignment, Grid, GridBuilder, InjIdx, Side, SubIdx,
    Terminal, TopologyChange,
};
pub use superposition::{build_basis, solve_betas, superpose, BetaSolution, StBasis};
