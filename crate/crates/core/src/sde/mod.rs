//! Euler–Maruyama simulation of the reduced state equation
//! `dX = A_{α,n} X dt + σ⁽ⁿ⁾(X) dW⁰ + Σᵢ wᵢ dWⁱ`, with noise streams keyed by
//! `(seed, path, channel)` so that rungs of the ladder share Brownian
//! increments, and the coupled convergence studies built on that.

mod model;
mod noise;
mod paths;
mod schedule;
mod studies;

pub use model::{DriftScheme, FiniteModel, Rung};
pub use noise::{NoiseSource, INIT_CHANNEL, RULE_CHANNEL};
pub use paths::{
    read_paths_binary, simulate_paths, write_paths_binary, InitialState, PathBundle, PathSampler,
    PathSet, SimConfig,
};
pub use schedule::{epsilon_schedule, EpsilonSchedule};
pub use studies::{
    galerkin_convergence_study, lipschitz_surrogate, moment_study, strong_order_study,
    yosida_convergence_study, ConvergenceReport, ConvergenceRow, MomentRow, StrongOrderReport,
};
