use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Parametric family for `γ`, with `σ(x) = Q γ(x)`. Vectors shorter than the
/// master truncation are zero-padded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GammaFamily {
    /// `γ(x) ≡ γ`.
    Constant { gamma: Vec<f64> },
    /// `γ_i(x) = base_i + slope_i · width_i · tanh(x_i / width_i)`: affine near
    /// the origin, saturating at `base_i ± slope_i · width_i`.
    SaturatedAffine {
        base: Vec<f64>,
        slope: Vec<f64>,
        width: Vec<f64>,
    },
}

/// Diffusion coefficient of the state equation. The driving noise `W⁰` is
/// scalar, so `σ(x)` is a single vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionSpec {
    pub family: GammaFamily,
}

fn pad(v: &[f64], i: usize) -> f64 {
    v.get(i).copied().unwrap_or(0.0)
}

impl DiffusionSpec {
    pub fn new(family: GammaFamily) -> Result<Self> {
        let spec = Self { family };
        spec.validate()?;
        Ok(spec)
    }

    pub fn zero() -> Self {
        Self {
            family: GammaFamily::Constant { gamma: vec![] },
        }
    }

    pub fn constant(gamma: Vec<f64>) -> Self {
        Self {
            family: GammaFamily::Constant { gamma },
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.family {
            GammaFamily::Constant { gamma } => {
                if let Some(i) = gamma.iter().position(|g| !g.is_finite()) {
                    return Err(Error::NonFinite {
                        what: "gamma",
                        coordinate: i,
                    });
                }
            }
            GammaFamily::SaturatedAffine { base, slope, width } => {
                if base.len() != slope.len() || base.len() != width.len() {
                    return Err(Error::Length {
                        what: "saturated-affine gamma parameters",
                        expected: base.len(),
                        got: slope.len().max(width.len()),
                    });
                }
                if let Some(i) = width.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
                    return Err(Error::Input(format!(
                        "saturated-affine width[{i}] must be positive"
                    )));
                }
                if let Some(i) = base
                    .iter()
                    .chain(slope.iter())
                    .position(|g| !g.is_finite())
                {
                    return Err(Error::NonFinite {
                        what: "gamma",
                        coordinate: i % base.len().max(1),
                    });
                }
            }
        }
        Ok(())
    }

    /// Number of coordinates on which `γ` may be nonzero.
    pub fn support(&self) -> usize {
        match &self.family {
            GammaFamily::Constant { gamma } => gamma.len(),
            GammaFamily::SaturatedAffine { base, .. } => base.len(),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.family, GammaFamily::Constant { .. })
    }

    pub fn is_zero(&self) -> bool {
        match &self.family {
            GammaFamily::Constant { gamma } => gamma.iter().all(|g| *g == 0.0),
            GammaFamily::SaturatedAffine { base, slope, .. } => {
                base.iter().chain(slope).all(|g| *g == 0.0)
            }
        }
    }

    /// `γ_i(x)`; depends on `x_i` only.
    pub fn gamma_i(&self, i: usize, xi: f64) -> f64 {
        match &self.family {
            GammaFamily::Constant { gamma } => pad(gamma, i),
            GammaFamily::SaturatedAffine { base, slope, width } => {
                if i >= base.len() {
                    return 0.0;
                }
                base[i] + slope[i] * width[i] * (xi / width[i]).tanh()
            }
        }
    }

    /// `∂γ_i/∂x_i` (the Jacobian of `γ` is diagonal for both families).
    pub fn dgamma_ii(&self, i: usize, xi: f64) -> f64 {
        match &self.family {
            GammaFamily::Constant { .. } => 0.0,
            GammaFamily::SaturatedAffine { slope, width, .. } => {
                if i >= slope.len() {
                    return 0.0;
                }
                let c = (xi / width[i]).cosh();
                slope[i] / (c * c)
            }
        }
    }

    /// Reduced diffusion `σ^{(n)}(x) = P_n Q γ(P_n x)` for `x ∈ ℝ^n`.
    pub fn sigma(&self, lambdas: &[f64], x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = lambdas[i] * self.gamma_i(i, x[i]);
        }
    }

    /// Diagonal of `Dσ^{(n)}(x)`.
    pub fn dsigma_diag(&self, lambdas: &[f64], x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = lambdas[i] * self.dgamma_ii(i, x[i]);
        }
    }

    /// Declared bound on `‖γ(x)‖`.
    pub fn gamma_bound(&self) -> f64 {
        match &self.family {
            GammaFamily::Constant { gamma } => gamma.iter().map(|g| g * g).sum::<f64>().sqrt(),
            GammaFamily::SaturatedAffine { base, slope, width } => base
                .iter()
                .zip(slope)
                .zip(width)
                .map(|((b, s), w)| {
                    let m = b.abs() + s.abs() * w;
                    m * m
                })
                .sum::<f64>()
                .sqrt(),
        }
    }

    /// Declared bound on `‖Dγ(x)‖` (operator norm of a diagonal Jacobian).
    pub fn dgamma_bound(&self) -> f64 {
        match &self.family {
            GammaFamily::Constant { .. } => 0.0,
            GammaFamily::SaturatedAffine { slope, .. } => {
                slope.iter().fold(0.0, |m, s| m.max(s.abs()))
            }
        }
    }
}
