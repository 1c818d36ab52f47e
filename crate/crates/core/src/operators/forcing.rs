use super::GeneratorCoefficients;
use crate::problem::{GainSpec, Payoff};
use crate::{Error, Result};

/// Reduced gain `Θ⁽ⁿ⁾(t, x) = Θ(t, P_n x)`: the projection direction is cut
/// to its first `n` entries, which reproduces `Θ` on `H⁽ⁿ⁾` exactly.
pub fn project_gain(gain: &GainSpec, n: usize, n_master: usize) -> Result<GainSpec> {
    if n == 0 || n > n_master {
        return Err(Error::Dimension { got: n, max: n_master });
    }
    let mut reduced = gain.clone();
    match &mut reduced.payoff {
        Payoff::Constant { .. } => {}
        Payoff::Put { direction, .. } | Payoff::Call { direction, .. } => direction.truncate(n),
    }
    Ok(reduced)
}

/// `f = ∂Θ⁽ⁿ⁾/∂t + L_{α,n} Θ⁽ⁿ⁾`, assembled from the closed-form derivatives
/// of the gain family.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingField {
    gain: GainSpec,
    coeffs: GeneratorCoefficients,
}

impl ForcingField {
    /// `gain` must already be reduced to the dimension of `coeffs`.
    pub fn new(gain: GainSpec, coeffs: GeneratorCoefficients) -> Result<Self> {
        if gain.direction().len() > coeffs.dim() {
            return Err(Error::Length {
                what: "reduced gain direction",
                expected: coeffs.dim(),
                got: gain.direction().len(),
            });
        }
        Ok(Self { gain, coeffs })
    }

    pub fn gain(&self) -> &GainSpec {
        &self.gain
    }

    pub fn coeffs(&self) -> &GeneratorCoefficients {
        &self.coeffs
    }

    pub fn dim(&self) -> usize {
        self.coeffs.dim()
    }

    pub fn value(&self, t: f64, x: &[f64]) -> f64 {
        let n = self.dim();
        let mut b = vec![0.0; n * n];
        let mut ax = vec![0.0; n];
        let mut g = vec![0.0; n];
        self.coeffs.b_matrix(x, &mut b);
        self.coeffs.drift_at(x, &mut ax);
        self.gain.gradient(t, x, &mut g);
        let transport: f64 = ax.iter().zip(&g).map(|(p, q)| p * q).sum();
        self.gain.dt(t, x) + 0.5 * self.gain.trace_hessian_with(t, x, &b) + transport
    }

    /// The triangle-inequality bound `L'_Θ + ½ Tr B(x)·‖D²Θ‖ + ‖A x‖·L_Θ`.
    pub fn bound(&self, x: &[f64]) -> f64 {
        let n = self.dim();
        let bounds = self.gain.bounds();
        let mut b = vec![0.0; n * n];
        let mut ax = vec![0.0; n];
        self.coeffs.b_matrix(x, &mut b);
        self.coeffs.drift_at(x, &mut ax);
        let tr: f64 = (0..n).map(|i| b[i * n + i]).sum();
        let axn = ax.iter().map(|v| v * v).sum::<f64>().sqrt();
        bounds.lip_t + 0.5 * tr * bounds.hessian + axn * bounds.lip_x
    }
}
