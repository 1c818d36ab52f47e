//! Numerical laboratory for optimal stopping of diffusions on a separable
//! Hilbert space.
//!
//! The crate builds the approximation ladder used to compute the value
//! function: a Yosida approximation of the unbounded drift, a Galerkin
//! reduction onto the first `n` eigen-directions of the covariance, an
//! arrested problem on the ball `O_R`, and a parabolic obstacle problem
//! solved by penalization or projected SOR. Monte Carlo machinery then checks
//! the optimal stopping rule, dynamic programming identities and ladder
//! convergence against independent oracles.
//!
//! Module map:
//! - [`problem`]: covariance, Gaussian measures, gains, diffusions and
//!   Gauss–Sobolev norms.
//! - [`operators`]: Yosida matrices, generator coefficients, forcing, the
//!   Gauss-weighted bilinear form and trace diagnostics.
//! - [`sde`]: Euler–Maruyama simulation with coupled noise and ladder
//!   convergence studies.
//! - [`vi`]: the obstacle-problem solvers and the R/ε sweeps.
//! - [`stopping`]: contact regions, stopping rules on paths, dynamic
//!   programming checks, lattice and regression oracles.
//! - [`ou`]: the symmetric Ornstein–Uhlenbeck special case.

pub mod error;
pub mod operators;
pub mod ou;
pub mod problem;
pub mod sde;
pub mod stats;
pub mod stopping;
pub mod vi;

pub use error::{Error, Result};
