//! Problem data: covariance and Gaussian measure, drift operator, diffusion
//! and gain families, and the Gauss–Sobolev norms built on them.

mod covariance;
mod diffusion;
mod field;
mod gain;
mod measure;
mod norms;
mod operator;
mod quadrature;
mod spec;

pub use covariance::CovarianceSpec;
pub use diffusion::{DiffusionSpec, GammaFamily};
pub use field::{monomials, PolyField, ScalarField};
pub use gain::{GainBounds, GainCheck, GainSpec, Payoff, TimeFactor};
pub use measure::{Estimate, GaussianMeasure, Quadrature, TensorGrid};
pub use norms::{
    friedrichs_gradient, friedrichs_gradient_with_step, lp_norm, vpn_norm, write_norm_csv,
    NormReport,
};
pub use operator::OperatorSpec;
pub use quadrature::HermiteRule;
pub use spec::ProblemSpec;
