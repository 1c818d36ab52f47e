//! Operator algebra of the approximation ladder.
//!
//! A rung `(α, n)` replaces the unbounded drift by its Yosida approximation
//! `A_α = αA(αI − A)⁻¹`, projects it onto the first `n` modes, and attaches
//! the reduced diffusion plus an `εₙ`-regularizing noise. From that data this
//! module assembles the generator coefficients `B`, `C̄`, the obstacle forcing
//! `f`, and the Gauss-weighted bilinear form.

mod bilinear;
mod forcing;
mod generator;
mod trace;
mod yosida;

pub use bilinear::{bilinear_form, generator_pairing};
pub use forcing::{project_gain, ForcingField};
pub use generator::GeneratorCoefficients;
pub use trace::{trace_diagnostics, write_trace_csv, TraceReport, TraceRow, DECAY_FLAG, TAIL_FLAG};
pub use yosida::{yosida, YosidaMatrix, RESOLVENT_CONDITION_LIMIT};
