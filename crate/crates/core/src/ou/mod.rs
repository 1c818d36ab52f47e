//! Symmetric Ornstein-Uhlenbeck case: invariant Gaussian law, the
//! symmetric Dirichlet form under it and the checks built on them.

mod form;
mod invariant;

pub use form::{dual_pairing_check, symmetric_form, uniqueness_surrogate, DualPairing, SeparableGain};
pub use invariant::{
    empirical_invariant_check, invariant_covariance, CrossRow, InvariantCheckConfig, InvariantMeasure,
    InvariantReport, InvariantRow, InvariantStart,
};
