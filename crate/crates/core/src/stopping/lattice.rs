use serde::{Deserialize, Serialize};

use crate::problem::GainSpec;
use crate::sde::FiniteModel;
use crate::stats::{normal_cdf, normal_pdf};
use crate::{Error, Result};

/// Which lattice dates allow stopping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Exercise {
    #[default]
    EveryStep,
    TerminalOnly,
}

/// A scalar Ornstein-Uhlenbeck lattice `dX = a X dt + s dW` on
/// `[−L, L]` with spacing `h` and `steps` time steps on `[t0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeParams {
    pub drift: f64,
    pub diffusion: f64,
    pub t0: f64,
    pub horizon: f64,
    pub x0: f64,
    pub half_width: f64,
    pub spacing: f64,
    pub steps: usize,
    #[serde(default)]
    pub exercise: Exercise,
}

/// Transition stencils are cut at this many standard deviations.
const STENCIL_SDS: f64 = 8.0;

impl LatticeParams {
    /// Reads `a` and `s = √B` from a one-dimensional model with constant
    /// diffusion.
    pub fn from_model(model: &FiniteModel, x0: f64, half_width: f64, spacing: f64, steps: usize) -> Result<Self> {
        if model.dim() != 1 {
            return Err(Error::Contract(format!(
                "lattice oracle needs a one-dimensional model, got n = {}",
                model.dim()
            )));
        }
        let c = model.coeffs();
        let mut b = [0.0];
        let mut b2 = [0.0];
        c.b_matrix(&[0.0], &mut b);
        c.b_matrix(&[1.0], &mut b2);
        if (b[0] - b2[0]).abs() > 1e-14 * b[0].abs().max(1.0) {
            return Err(Error::Contract("lattice oracle needs state-independent diffusion".into()));
        }
        let mut a = [0.0];
        c.drift_at(&[1.0], &mut a);
        Ok(Self {
            drift: a[0],
            diffusion: b[0].sqrt(),
            t0: 0.0,
            horizon: model.horizon(),
            x0,
            half_width,
            spacing,
            steps,
            exercise: Exercise::EveryStep,
        })
    }

    fn dt(&self) -> f64 {
        (self.horizon - self.t0) / self.steps as f64
    }

    /// Standard deviation of the exact one-step transition.
    fn step_sd(&self) -> f64 {
        let dt = self.dt();
        let a = self.drift;
        let s2 = self.diffusion * self.diffusion;
        let var = if a.abs() * dt < 1e-12 {
            s2 * dt
        } else {
            s2 * ((2.0 * a * dt).exp() - 1.0) / (2.0 * a)
        };
        var.sqrt()
    }

    fn validate(&self) -> Result<()> {
        if self.steps == 0 || !(self.horizon > self.t0) {
            return Err(Error::Input("lattice needs steps >= 1 and T > t0".into()));
        }
        if !(self.spacing > 0.0) || !(self.half_width > self.x0.abs()) {
            return Err(Error::Input("lattice needs h > 0 and |x0| < L".into()));
        }
        let v = self.step_sd();
        if v > 0.0 && v < self.spacing {
            return Err(Error::Accuracy(format!(
                "one-step standard deviation {v:.3e} is below the spacing {:.3e}; refine the space grid",
                self.spacing
            )));
        }
        let spread = self.diffusion * (self.horizon - self.t0).sqrt() * STENCIL_SDS;
        let reach = self.x0.abs().max(self.x0.abs() * (self.drift * (self.horizon - self.t0)).exp()) + spread;
        if reach > self.half_width {
            return Err(Error::Accuracy(format!(
                "paths from x0 reach {reach:.3} within {STENCIL_SDS} standard deviations, beyond L = {}",
                self.half_width
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeValue {
    /// `V_0(x0)` by linear interpolation.
    pub value: f64,
    pub xs: Vec<f64>,
    /// `V_0` on the lattice.
    pub v0: Vec<f64>,
}

/// `E[V(m + v Z)]` for `V` piecewise linear on `xs`, constant beyond the
/// stencil.
fn expect_linear(xs: &[f64], vals: &[f64], h: f64, m: f64, v: f64) -> f64 {
    let nodes = xs.len();
    if v == 0.0 {
        return interpolate(xs, vals, h, m);
    }
    let lo = ((m - STENCIL_SDS * v - xs[0]) / h).floor().max(0.0) as usize;
    let hi = (((m + STENCIL_SDS * v - xs[0]) / h).ceil().max(0.0) as usize).min(nodes - 1);
    let lo = lo.min(hi);
    let alpha = (xs[lo] - m) / v;
    let mut cdf = normal_cdf(alpha);
    let mut pdf = normal_pdf(alpha);
    let mut total = cdf * vals[lo];
    for j in lo..hi {
        let a1 = (xs[j + 1] - m) / v;
        let c1 = normal_cdf(a1);
        let p1 = normal_pdf(a1);
        let mass = c1 - cdf;
        let moment = (m - xs[j]) * mass + v * (pdf - p1);
        total += vals[j] * mass + (vals[j + 1] - vals[j]) / h * moment;
        cdf = c1;
        pdf = p1;
    }
    total + (1.0 - cdf) * vals[hi]
}

fn interpolate(xs: &[f64], vals: &[f64], h: f64, x: f64) -> f64 {
    let s = ((x - xs[0]) / h).clamp(0.0, (xs.len() - 1) as f64);
    let i = (s.floor() as usize).min(xs.len() - 2);
    let w = s - i as f64;
    (1.0 - w) * vals[i] + w * vals[i + 1]
}

/// Backward dynamic programming `V_k = max(Θ(t_k, ·), E[V_{k+1}])` with
/// the exact Gaussian transition integrated against the piecewise-linear
/// interpolant of `V_{k+1}`.
pub fn lattice_oracle_1d(params: &LatticeParams, gain: &GainSpec) -> Result<LatticeValue> {
    params.validate()?;
    if gain.direction().len() > 1 {
        return Err(Error::Contract("lattice oracle needs a one-dimensional gain".into()));
    }
    let h = params.spacing;
    let cells = (2.0 * params.half_width / h).round() as usize;
    let xs: Vec<f64> = (0..=cells).map(|i| -params.half_width + i as f64 * h).collect();
    let dt = params.dt();
    let decay = (params.drift * dt).exp();
    let sd = params.step_sd();
    let time = |k: usize| params.t0 + k as f64 * dt;
    let mut v: Vec<f64> = xs.iter().map(|&x| gain.value(params.horizon, &[x])).collect();
    let mut next = vec![0.0; v.len()];
    for k in (0..params.steps).rev() {
        let t = time(k);
        for (i, &x) in xs.iter().enumerate() {
            let cont = expect_linear(&xs, &v, h, decay * x, sd);
            next[i] = match params.exercise {
                Exercise::EveryStep => cont.max(gain.value(t, &[x])),
                Exercise::TerminalOnly => cont,
            };
        }
        std::mem::swap(&mut v, &mut next);
    }
    Ok(LatticeValue {
        value: interpolate(&xs, &v, h, params.x0),
        xs,
        v0: v,
    })
}
