use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::operators::{project_gain, ForcingField, GeneratorCoefficients, YosidaMatrix};
use crate::problem::{CovarianceSpec, DiffusionSpec, GainSpec, OperatorSpec, ProblemSpec};
use crate::{Error, Result};

/// Treatment of the linear drift in one time step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriftScheme {
    #[default]
    Explicit,
    /// `X⁺ = X + Δt A(θX⁺ + (1−θ)X) + noise`. `θ = ½` preserves the
    /// stationary variance of a linear OU equation exactly.
    Theta { theta: f64 },
}

/// Ladder coordinates of a model, carried as provenance by paths and fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rung {
    /// `None` stands for `α = ∞`.
    pub alpha: Option<f64>,
    pub n: usize,
}

impl std::fmt::Display for Rung {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.alpha {
            Some(a) => write!(f, "alpha={a},n={}", self.n),
            None => write!(f, "alpha=inf,n={}", self.n),
        }
    }
}

/// One `(α, n, εₙ)` rung: reduced drift, diffusion, noise weights, reduced
/// gain and horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteModel {
    coeffs: GeneratorCoefficients,
    gain: GainSpec,
    horizon: f64,
    scheme: DriftScheme,
}

impl FiniteModel {
    /// The rung `(α, n)` of `problem`, with `εₙ` from its schedule.
    pub fn from_problem(problem: &ProblemSpec, alpha: Option<f64>, n: usize) -> Result<Self> {
        problem.covariance.check_dim(n)?;
        let eps = if problem.schedule.is_zero() {
            0.0
        } else {
            problem.schedule.epsilon(n)?
        };
        let drift = YosidaMatrix::new(&problem.operator, alpha, n)?;
        let coeffs = GeneratorCoefficients::new(drift, problem.diffusion.clone(), &problem.covariance, eps)?;
        let gain = project_gain(&problem.gain, n, problem.n_master())?;
        Ok(Self {
            coeffs,
            gain,
            horizon: problem.horizon(),
            scheme: DriftScheme::Explicit,
        })
    }

    /// Symmetric OU dynamics `dX = AX dt + Q^{1/2} dB` on the first `n`
    /// modes: no scalar diffusion, channel `i` weighted by `√λᵢ`.
    pub fn ou(op: &OperatorSpec, cov: &CovarianceSpec, n: usize, gain: GainSpec) -> Result<Self> {
        let drift = YosidaMatrix::exact(op, n)?;
        let weights = cov.head(n)?.iter().map(|l| l.sqrt()).collect();
        let coeffs = GeneratorCoefficients::with_weights(drift, DiffusionSpec::zero(), cov, 0.0, weights)?;
        let horizon = gain.horizon;
        let gain = project_gain(&gain, n, cov.n_master())?;
        Ok(Self {
            coeffs,
            gain,
            horizon,
            scheme: DriftScheme::Explicit,
        })
    }

    pub fn from_parts(coeffs: GeneratorCoefficients, gain: GainSpec) -> Result<Self> {
        let horizon = gain.horizon;
        let gain = project_gain(&gain, coeffs.dim(), coeffs.dim().max(gain.direction().len()))?;
        Ok(Self {
            coeffs,
            gain,
            horizon,
            scheme: DriftScheme::Explicit,
        })
    }

    pub fn with_scheme(mut self, scheme: DriftScheme) -> Result<Self> {
        if let DriftScheme::Theta { theta } = scheme {
            if !(0.0..=1.0).contains(&theta) {
                return Err(Error::Input(format!("theta must lie in [0, 1], got {theta}")));
            }
        }
        self.scheme = scheme;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.coeffs.dim()
    }

    pub fn rung(&self) -> Rung {
        Rung {
            alpha: self.coeffs.drift().alpha(),
            n: self.dim(),
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.coeffs.epsilon()
    }

    pub fn coeffs(&self) -> &GeneratorCoefficients {
        &self.coeffs
    }

    pub fn gain(&self) -> &GainSpec {
        &self.gain
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn scheme(&self) -> DriftScheme {
        self.scheme
    }

    pub fn forcing(&self) -> ForcingField {
        ForcingField::new(self.gain.clone(), self.coeffs.clone()).expect("gain reduced to model dimension")
    }

    /// `‖A_{α,n}‖·Δt`; above ½ the implicit drift option is advisable.
    pub fn stiffness(&self, dt: f64) -> f64 {
        self.coeffs.drift().norm() * dt
    }

    pub(crate) fn stepper(&self, dt: f64) -> Stepper<'_> {
        let n = self.dim();
        let implicit = match self.scheme {
            DriftScheme::Explicit => None,
            DriftScheme::Theta { theta } => {
                let a = self.coeffs.drift().matrix();
                let lhs = DMatrix::<f64>::identity(n, n) - a * (theta * dt);
                let inv = lhs.try_inverse().expect("I - theta dt A is invertible for dissipative A");
                let rhs = DMatrix::<f64>::identity(n, n) + a * ((1.0 - theta) * dt);
                Some((&inv * rhs, inv))
            }
        };
        Stepper {
            model: self,
            dt,
            implicit,
            sig: vec![0.0; n],
            ax: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }
}

/// One-step map with preallocated scratch space.
pub(crate) struct Stepper<'a> {
    model: &'a FiniteModel,
    dt: f64,
    /// `((I − θΔtA)⁻¹(I + (1−θ)ΔtA), (I − θΔtA)⁻¹)`.
    implicit: Option<(DMatrix<f64>, DMatrix<f64>)>,
    sig: Vec<f64>,
    ax: Vec<f64>,
    tmp: Vec<f64>,
}

impl Stepper<'_> {
    /// Advances `x` by one step. `dw` holds the increments of channels
    /// `0..=n` (channel 0 drives `σ`).
    pub(crate) fn step(&mut self, x: &mut [f64], dw: &[f64]) {
        let c = &self.model.coeffs;
        let n = x.len();
        c.sigma(x, &mut self.sig);
        let w = c.weights();
        match &self.implicit {
            None => {
                c.drift_at(x, &mut self.ax);
                for i in 0..n {
                    x[i] += self.ax[i] * self.dt + self.sig[i] * dw[0] + w[i] * dw[i + 1];
                }
            }
            Some((prop, inv)) => {
                for i in 0..n {
                    let mut s = 0.0;
                    for j in 0..n {
                        s += prop[(i, j)] * x[j];
                    }
                    self.tmp[i] = s;
                }
                for i in 0..n {
                    let mut s = 0.0;
                    for j in 0..n {
                        s += inv[(i, j)] * (self.sig[j] * dw[0] + w[j] * dw[j + 1]);
                    }
                    self.tmp[i] += s;
                }
                x.copy_from_slice(&self.tmp);
            }
        }
    }
}
