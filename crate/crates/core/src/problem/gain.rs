//! Gain functions `Θ(t, x) = g(t) · h(⟨ℓ, x⟩)`.
//!
//! The put and call payoffs are the capped ramps `min((K − y)⁺, C)` and
//! `min((y − K)⁺, C)` with both kinks rounded by a softplus of width `δ`, which
//! keeps `Θ` twice continuously differentiable with `0 ≤ h ≤ C`, `|h'| ≤ 1` and
//! `|h''| ≤ 1/(4δ)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payoff {
    Constant {
        value: f64,
    },
    Put {
        direction: Vec<f64>,
        strike: f64,
        cap: f64,
        smoothing: f64,
    },
    Call {
        direction: Vec<f64>,
        strike: f64,
        cap: f64,
        smoothing: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeFactor {
    #[default]
    One,
    /// `g(t) = intercept + slope · t`, required to stay nonnegative on `[0, T]`.
    Affine { intercept: f64, slope: f64 },
    /// `g(t) = exp(−rate · t)`.
    Exponential { rate: f64 },
}

/// The constants `Θ̄`, `L_Θ`, `L'_Θ` and a bound on `‖D²Θ‖`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainBounds {
    pub theta_max: f64,
    pub lip_x: f64,
    pub lip_t: f64,
    pub hessian: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainSpec {
    pub payoff: Payoff,
    #[serde(default)]
    pub time: TimeFactor,
    pub horizon: f64,
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn logistic_prime(z: f64) -> f64 {
    let s = logistic(z);
    s * (1.0 - s)
}

impl GainSpec {
    pub fn new(payoff: Payoff, time: TimeFactor, horizon: f64) -> Result<Self> {
        let g = Self {
            payoff,
            time,
            horizon,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn constant(value: f64, horizon: f64) -> Result<Self> {
        Self::new(Payoff::Constant { value }, TimeFactor::One, horizon)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::Input(format!("horizon must be positive, got {}", self.horizon)));
        }
        match &self.payoff {
            Payoff::Constant { value } => {
                if !(value.is_finite() && *value >= 0.0) {
                    return Err(Error::Input("constant gain must be finite and >= 0".into()));
                }
            }
            Payoff::Put {
                direction,
                strike,
                cap,
                smoothing,
            }
            | Payoff::Call {
                direction,
                strike,
                cap,
                smoothing,
            } => {
                if direction.is_empty() || direction.iter().any(|l| !l.is_finite()) {
                    return Err(Error::Input("gain direction must be a nonempty finite vector".into()));
                }
                if !strike.is_finite() {
                    return Err(Error::Input("strike must be finite".into()));
                }
                if !(cap.is_finite() && *cap > 0.0) {
                    return Err(Error::Input("cap must be positive".into()));
                }
                if !(smoothing.is_finite() && *smoothing > 0.0) {
                    return Err(Error::Input("smoothing width must be positive".into()));
                }
            }
        }
        match self.time {
            TimeFactor::One => {}
            TimeFactor::Affine { intercept, slope } => {
                let end = intercept + slope * self.horizon;
                if !(intercept.is_finite() && slope.is_finite()) || intercept < 0.0 || end < -1e-15 {
                    return Err(Error::Input(
                        "affine time factor must be nonnegative on [0, T]".into(),
                    ));
                }
            }
            TimeFactor::Exponential { rate } => {
                if !rate.is_finite() {
                    return Err(Error::Input("exponential rate must be finite".into()));
                }
            }
        }
        Ok(())
    }

    pub fn direction(&self) -> &[f64] {
        match &self.payoff {
            Payoff::Constant { .. } => &[],
            Payoff::Put { direction, .. } | Payoff::Call { direction, .. } => direction,
        }
    }

    fn project(&self, x: &[f64]) -> f64 {
        self.direction().iter().zip(x).map(|(l, xi)| l * xi).sum()
    }

    fn time_factor(&self, t: f64) -> (f64, f64) {
        match self.time {
            TimeFactor::One => (1.0, 0.0),
            TimeFactor::Affine { intercept, slope } => ((intercept + slope * t).max(0.0), slope),
            TimeFactor::Exponential { rate } => {
                let g = (-rate * t).exp();
                (g, -rate * g)
            }
        }
    }

    /// `(h, h', h'')` at `y = ⟨ℓ, x⟩`.
    fn spatial(&self, y: f64) -> (f64, f64, f64) {
        match &self.payoff {
            Payoff::Constant { value } => (*value, 0.0, 0.0),
            Payoff::Put {
                strike,
                cap,
                smoothing: d,
                ..
            } => {
                let z1 = (strike - y) / d;
                let z2 = (strike - cap - y) / d;
                let h = (d * (softplus(z1) - softplus(z2))).clamp(0.0, *cap);
                let h1 = -logistic(z1) + logistic(z2);
                let h2 = (logistic_prime(z1) - logistic_prime(z2)) / d;
                (h, h1, h2)
            }
            Payoff::Call {
                strike,
                cap,
                smoothing: d,
                ..
            } => {
                let z1 = (y - strike) / d;
                let z2 = (y - strike - cap) / d;
                let h = (d * (softplus(z1) - softplus(z2))).clamp(0.0, *cap);
                let h1 = logistic(z1) - logistic(z2);
                let h2 = (logistic_prime(z1) - logistic_prime(z2)) / d;
                (h, h1, h2)
            }
        }
    }

    pub fn value(&self, t: f64, x: &[f64]) -> f64 {
        let (g, _) = self.time_factor(t);
        g * self.spatial(self.project(x)).0
    }

    pub fn dt(&self, t: f64, x: &[f64]) -> f64 {
        let (_, dg) = self.time_factor(t);
        dg * self.spatial(self.project(x)).0
    }

    /// `DΘ(t, x)` written into `out` (length = `x.len()`).
    pub fn gradient(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let (g, _) = self.time_factor(t);
        let (_, h1, _) = self.spatial(self.project(x));
        let dir = self.direction();
        for (i, o) in out.iter_mut().enumerate() {
            *o = g * h1 * dir.get(i).copied().unwrap_or(0.0);
        }
    }

    /// `D²Θ = g(t) h''(y) ℓ ℓᵀ` is rank one; returns the scalar `g h''`.
    pub fn hessian_scale(&self, t: f64, x: &[f64]) -> f64 {
        let (g, _) = self.time_factor(t);
        g * self.spatial(self.project(x)).2
    }

    /// `Tr[M D²Θ(t, x)]` for a symmetric `n × n` matrix `m` stored row-major.
    pub fn trace_hessian_with(&self, t: f64, x: &[f64], m: &[f64]) -> f64 {
        let n = x.len();
        let scale = self.hessian_scale(t, x);
        if scale == 0.0 {
            return 0.0;
        }
        let dir = self.direction();
        let l = |i: usize| dir.get(i).copied().unwrap_or(0.0);
        let mut q = 0.0;
        for i in 0..n {
            let li = l(i);
            if li == 0.0 {
                continue;
            }
            for j in 0..n {
                q += li * m[i * n + j] * l(j);
            }
        }
        scale * q
    }

    /// Full Hessian, row-major.
    pub fn hessian(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        let scale = self.hessian_scale(t, x);
        let dir = self.direction();
        let l = |i: usize| dir.get(i).copied().unwrap_or(0.0);
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = scale * l(i) * l(j);
            }
        }
    }

    pub fn bounds(&self) -> GainBounds {
        let t_end = self.horizon;
        let (g_max, dg_max) = match self.time {
            TimeFactor::One => (1.0, 0.0),
            TimeFactor::Affine { intercept, slope } => {
                (intercept.max(intercept + slope * t_end), slope.abs())
            }
            TimeFactor::Exponential { rate } => {
                let g = 1f64.max((-rate * t_end).exp());
                (g, rate.abs() * g)
            }
        };
        let norm_l = self.direction().iter().map(|l| l * l).sum::<f64>().sqrt();
        let (h_max, h1_max, h2_max) = match &self.payoff {
            Payoff::Constant { value } => (*value, 0.0, 0.0),
            Payoff::Put { cap, smoothing, .. } | Payoff::Call { cap, smoothing, .. } => {
                (*cap, 1.0, 0.25 / smoothing)
            }
        };
        GainBounds {
            theta_max: g_max * h_max,
            lip_x: g_max * h1_max * norm_l,
            lip_t: dg_max * h_max,
            hessian: g_max * h2_max * norm_l * norm_l,
        }
    }

    /// Samples `count` points `(t, x)` with `t ∈ [0, T]` and `x` uniform in
    /// `[-radius, radius]^dim`, and verifies the declared bounds: exact range
    /// check on `Θ`, and finite-difference slopes against `L_Θ`, `L'_Θ` within
    /// a relative tolerance.
    pub fn check_bounds(
        &self,
        dim: usize,
        radius: f64,
        count: usize,
        rel_tol: f64,
        seed: u64,
    ) -> GainCheck {
        let b = self.bounds();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = GainCheck {
            samples: count,
            min_value: f64::INFINITY,
            max_value: f64::NEG_INFINITY,
            max_slope_x: 0.0,
            max_slope_t: 0.0,
            passed: true,
        };
        let hx = 1e-4 * radius.max(1.0);
        let ht = 1e-4 * self.horizon;
        let mut x = vec![0.0; dim];
        let mut y = vec![0.0; dim];
        for _ in 0..count {
            let t = rng.random::<f64>() * self.horizon;
            for xi in x.iter_mut() {
                *xi = radius * (2.0 * rng.random::<f64>() - 1.0);
            }
            let v = self.value(t, &x);
            out.min_value = out.min_value.min(v);
            out.max_value = out.max_value.max(v);
            // random unit direction
            let mut norm = 0.0;
            for yi in y.iter_mut() {
                *yi = 2.0 * rng.random::<f64>() - 1.0;
                norm += *yi * *yi;
            }
            let norm = norm.sqrt().max(1e-12);
            let xp: Vec<f64> = x.iter().zip(&y).map(|(a, d)| a + hx * d / norm).collect();
            let sx = (self.value(t, &xp) - v).abs() / hx;
            out.max_slope_x = out.max_slope_x.max(sx);
            let t2 = (t + ht).min(self.horizon);
            let t1 = t2 - ht;
            let st = (self.value(t2, &x) - self.value(t1, &x)).abs() / ht;
            out.max_slope_t = out.max_slope_t.max(st);
        }
        out.passed = out.min_value >= 0.0
            && out.max_value <= b.theta_max
            && out.max_slope_x <= b.lip_x * (1.0 + rel_tol) + 1e-12
            && out.max_slope_t <= b.lip_t * (1.0 + rel_tol) + 1e-12;
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainCheck {
    pub samples: usize,
    pub min_value: f64,
    pub max_value: f64,
    pub max_slope_x: f64,
    pub max_slope_t: f64,
    pub passed: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn put() -> GainSpec {
        GainSpec::new(
            Payoff::Put {
                direction: vec![1.0],
                strike: 1.0,
                cap: 1.0,
                smoothing: 0.05,
            },
            TimeFactor::One,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn smoothed_put_approximates_capped_ramp() {
        let g = put();
        assert!((g.value(0.0, &[0.5]) - 0.5).abs() < 1e-6);
        assert!(g.value(0.0, &[3.0]) < 1e-12);
        assert!((g.value(0.0, &[-3.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn closed_form_derivatives_match_finite_differences() {
        let g = GainSpec::new(
            Payoff::Call {
                direction: vec![0.6, -0.8],
                strike: 0.2,
                cap: 0.7,
                smoothing: 0.1,
            },
            TimeFactor::Exponential { rate: 0.3 },
            2.0,
        )
        .unwrap();
        let h = 1e-5;
        for &(t, x0, x1) in &[(0.3, 0.1, -0.2), (1.1, 0.9, 0.4), (1.9, -0.5, 0.0)] {
            let x = [x0, x1];
            let mut grad = [0.0; 2];
            g.gradient(t, &x, &mut grad);
            for k in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[k] += h;
                xm[k] -= h;
                let fd = (g.value(t, &xp) - g.value(t, &xm)) / (2.0 * h);
                assert!((fd - grad[k]).abs() < 1e-7, "grad {k}: {fd} vs {}", grad[k]);
            }
            let fdt = (g.value(t + h, &x) - g.value(t - h, &x)) / (2.0 * h);
            assert!((fdt - g.dt(t, &x)).abs() < 1e-7);
            let mut hess = [0.0; 4];
            g.hessian(t, &x, &mut hess);
            for k in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[k] += h;
                xm[k] -= h;
                let mut gp = [0.0; 2];
                let mut gm = [0.0; 2];
                g.gradient(t, &xp, &mut gp);
                g.gradient(t, &xm, &mut gm);
                for j in 0..2 {
                    let fd = (gp[j] - gm[j]) / (2.0 * h);
                    assert!((fd - hess[j * 2 + k]).abs() < 1e-5);
                }
            }
        }
    }

    #[test]
    fn sampled_bounds_hold() {
        let check = put().check_bounds(1, 4.0, 10_000, 0.01, 3);
        assert!(check.passed, "{check:?}");
        let tg = GainSpec::new(
            Payoff::Constant { value: 1.0 },
            TimeFactor::Affine {
                intercept: 1.0,
                slope: -1.0,
            },
            1.0,
        )
        .unwrap();
        assert!(tg.check_bounds(2, 3.0, 10_000, 0.01, 4).passed);
    }

    #[test]
    fn negative_affine_factor_rejected() {
        let r = GainSpec::new(
            Payoff::Constant { value: 1.0 },
            TimeFactor::Affine {
                intercept: 0.5,
                slope: -1.0,
            },
            1.0,
        );
        assert!(r.is_err());
    }
}
