//! The full problem description at the master truncation.

use serde::{Deserialize, Serialize};

use super::{CovarianceSpec, DiffusionSpec, GainSpec, GammaFamily, OperatorSpec, Payoff, TimeFactor};
use crate::sde::EpsilonSchedule;
use crate::{Error, Result};

/// Operator `A`, covariance `Q`, diffusion `γ`, gain `Θ` (which carries the
/// horizon `T`), the regularization schedule `εₙ` and the start point `x₀`.
/// Vectors shorter than the master truncation are zero-padded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub operator: OperatorSpec,
    pub covariance: CovarianceSpec,
    pub diffusion: DiffusionSpec,
    pub gain: GainSpec,
    pub schedule: EpsilonSchedule,
    #[serde(default)]
    pub x0: Vec<f64>,
}

impl ProblemSpec {
    pub fn new(
        operator: OperatorSpec,
        covariance: CovarianceSpec,
        diffusion: DiffusionSpec,
        gain: GainSpec,
        schedule: EpsilonSchedule,
        x0: Vec<f64>,
    ) -> Result<Self> {
        let spec = Self {
            operator,
            covariance,
            diffusion,
            gain,
            schedule,
            x0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn n_master(&self) -> usize {
        self.covariance.n_master()
    }

    pub fn horizon(&self) -> f64 {
        self.gain.horizon
    }

    /// `P_n x₀`, zero-padded or cut to length `n`.
    pub fn x0_head(&self, n: usize) -> Vec<f64> {
        (0..n).map(|i| self.x0.get(i).copied().unwrap_or(0.0)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_master();
        self.operator.validate()?;
        if self.operator.dim() != n {
            return Err(Error::Length {
                what: "operator (must match covariance truncation)",
                expected: n,
                got: self.operator.dim(),
            });
        }
        self.diffusion.validate()?;
        if self.diffusion.support() > n {
            return Err(Error::Length {
                what: "diffusion parameters",
                expected: n,
                got: self.diffusion.support(),
            });
        }
        self.gain.validate()?;
        if self.gain.direction().len() > n {
            return Err(Error::Length {
                what: "gain direction",
                expected: n,
                got: self.gain.direction().len(),
            });
        }
        if self.x0.len() > n {
            return Err(Error::Length {
                what: "x0",
                expected: n,
                got: self.x0.len(),
            });
        }
        if let Some(i) = self.x0.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "x0",
                coordinate: i,
            });
        }
        self.schedule.validate(n)?;
        Ok(())
    }

    /// The smoothed capped put on the first coordinate with mean-reverting
    /// drift: `a = (−0.05, −0.5)`, `λ = (1, 0.5)`, `γ = (0.3, 0)`, strike and
    /// cap 1, horizon 1, `x₀ = 1`.
    pub fn canonical_put() -> Self {
        Self::new(
            OperatorSpec::diagonal(vec![-0.05, -0.5]),
            CovarianceSpec::new(vec![1.0, 0.5]).expect("static data"),
            DiffusionSpec::constant(vec![0.3, 0.0]),
            GainSpec::new(
                Payoff::Put {
                    direction: vec![1.0, 0.0],
                    strike: 1.0,
                    cap: 1.0,
                    smoothing: 0.05,
                },
                TimeFactor::One,
                1.0,
            )
            .expect("static data"),
            EpsilonSchedule::Inverse { scale: 0.01 },
            vec![1.0],
        )
        .expect("static data")
    }

    /// A 16-mode diagonal problem with `a_k = −k`, `λ_k = k⁻⁴`, diffusion on
    /// the first two modes and a decaying start point; used for the Yosida
    /// and Galerkin studies.
    pub fn ladder_diag() -> Self {
        let n = 16;
        let a = (1..=n).map(|k| -(k as f64)).collect();
        let lambdas = (1..=n).map(|k| (k as f64).powi(-4)).collect();
        let x0 = (1..=n).map(|k| 1.0 / (k as f64)).collect();
        Self::new(
            OperatorSpec::diagonal(a),
            CovarianceSpec::new(lambdas).expect("static data"),
            DiffusionSpec::new(GammaFamily::SaturatedAffine {
                base: vec![0.4, 2.0],
                slope: vec![0.2, 1.0],
                width: vec![1.0, 1.0],
            })
            .expect("static data"),
            GainSpec::new(
                Payoff::Put {
                    direction: vec![1.0, 0.5],
                    strike: 1.0,
                    cap: 1.0,
                    smoothing: 0.05,
                },
                TimeFactor::One,
                1.0,
            )
            .expect("static data"),
            EpsilonSchedule::Inverse { scale: 0.1 },
            x0,
        )
        .expect("static data")
    }
}
