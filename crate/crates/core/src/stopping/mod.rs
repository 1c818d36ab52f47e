//! Optimal stopping on top of a solved value field.
//!
//! The contact set `{U − Θ ≤ δ}` defines a hitting rule that is evaluated
//! on simulated paths, against perturbed rules and against two oracles
//! that never touch the PDE: a scalar dynamic-programming lattice and
//! least-squares Monte Carlo.

mod evaluate;
mod lattice;
mod lsmc;
mod rule;

pub use evaluate::{
    delta_sensitivity, martingale_check, stop_on_paths, MartingaleReport, MartingaleRow, RuleVariant, StopStats,
};
pub use lattice::{lattice_oracle_1d, Exercise, LatticeParams, LatticeValue};
pub use lsmc::{lsmc_oracle, LsmcEstimate, LsmcParams};
pub use rule::{
    contact_region, write_free_boundary_csv, ContactSlice, FreeBoundaryRow, StoppingRule, DELTA_CONTACT,
};
