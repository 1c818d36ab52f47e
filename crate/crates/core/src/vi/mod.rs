//! Finite-difference solvers for the parabolic obstacle problem on
//! `[0, T] × O_R`, the value field they produce, and the penalty, domain
//! and norm sweeps.
//!
//! The PDE is assembled in non-divergence form with the coefficients `B`
//! and `A_{α,n}x`; the Gaussian measure only enters through the norms.

mod discretize;
mod domain;
mod field;
mod solve;
mod sparse;
mod sweeps;

pub use discretize::{SpatialOperator, PECLET_LIMIT};
pub use domain::DomainSpec;
pub use field::{FieldMeta, SolveMethod, ValueField};
pub use solve::{
    complementarity_residual, solve_penalized, solve_psor, PenaltyParams, PsorParams, ResidualStats,
    TimeScheme,
};
pub use sparse::{bicgstab, CsrMatrix, Ilu0};
pub use sweeps::{
    domain_sweep, l2_distance, norm_audit, penalty_sweep, solve_with, DomainSweep, NormAudit, NormAuditRow,
    PenaltyRow, PenaltySweep, SolverChoice, NUM_TOL,
};
