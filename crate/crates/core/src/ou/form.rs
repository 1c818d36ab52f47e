use serde::Serialize;

use super::InvariantMeasure;
use crate::problem::{CovarianceSpec, Estimate, GainSpec, OperatorSpec, Quadrature, ScalarField};
use crate::sde::FiniteModel;
use crate::vi::{l2_distance, solve_penalized, solve_psor, DomainSpec, PenaltyParams, PsorParams};
use crate::{Error, Result};

/// `a_ν(u, w) = ∫ ½⟨Q Du, Dw⟩ dν`.
pub fn symmetric_form(
    u: &dyn ScalarField,
    w: &dyn ScalarField,
    inv: &InvariantMeasure,
    method: &Quadrature,
) -> Result<Estimate> {
    let n = inv.dim();
    if u.dim() != n || w.dim() != n {
        return Err(Error::Length {
            what: "field dimension",
            expected: n,
            got: u.dim().max(w.dim()),
        });
    }
    inv.measure()?.integrate(
        |x| {
            let mut du = vec![0.0; n];
            let mut dw = vec![0.0; n];
            u.gradient(x, &mut du);
            w.gradient(x, &mut dw);
            0.5 * inv.lambdas.iter().zip(du.iter().zip(&dw)).map(|(q, (a, b))| q * a * b).sum::<f64>()
        },
        method,
    )
}

/// A time-separable gain `Θ(t, x) = e^{−rt} p(x)` for the pairing check.
pub struct SeparableGain<'a> {
    pub rate: f64,
    pub spatial: &'a dyn ScalarField,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualPairing {
    /// `(f(t), w)_ν` with `f = ∂Θ/∂t + L Θ` evaluated pointwise.
    pub direct: f64,
    /// `(∂Θ/∂t, w)_ν − a_ν(Θ(t), w)`.
    pub green: f64,
}

impl DualPairing {
    pub fn gap(&self) -> f64 {
        (self.direct - self.green).abs()
    }
}

/// Checks Green's formula `∫ (LΘ) w dν = −a_ν(Θ, w)` through the forcing
/// pairing at time `t`.
pub fn dual_pairing_check(
    op: &OperatorSpec,
    cov: &CovarianceSpec,
    inv: &InvariantMeasure,
    theta: &SeparableGain<'_>,
    w: &dyn ScalarField,
    t: f64,
    method: &Quadrature,
) -> Result<DualPairing> {
    let n = inv.dim();
    let model = FiniteModel::ou(op, cov, n, GainSpec::constant(0.0, 1.0)?)?;
    let coeffs = model.coeffs();
    let g = (-theta.rate * t).exp();
    let dg = -theta.rate * g;
    let p = theta.spatial;
    let nu = inv.measure()?;
    let direct = nu.integrate(|x| (dg * p.value(x) + g * coeffs.apply_generator(p, x)) * w.value(x), method)?;
    let dt_part = nu.integrate(|x| dg * p.value(x) * w.value(x), method)?;
    let form = symmetric_form(p, w, inv, method)?;
    Ok(DualPairing {
        direct: direct.value,
        green: dt_part.value - g * form.value,
    })
}

/// `L²(0,T; L²(ν))` distance between the penalized and PSOR solutions of
/// one OU instance.
pub fn uniqueness_surrogate(
    model: &FiniteModel,
    dom: &DomainSpec,
    inv: &InvariantMeasure,
    epsilon: f64,
    steps: usize,
) -> Result<f64> {
    let a = solve_penalized(model, dom, &PenaltyParams::new(epsilon, steps))?;
    let b = solve_psor(model, dom, &PsorParams::new(steps))?;
    l2_distance(&a, &b, &inv.measure()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ou::invariant_covariance;
    use crate::problem::PolyField;

    fn inv2() -> (OperatorSpec, CovarianceSpec, InvariantMeasure) {
        let op = OperatorSpec::diagonal(vec![-1.0, -2.0]);
        let cov = CovarianceSpec::new(vec![2.0, 1.0]).unwrap();
        let inv = invariant_covariance(&op, &cov, 2).unwrap();
        (op, cov, inv)
    }

    #[test]
    fn linear_fields_give_half_q() {
        let op = OperatorSpec::diagonal(vec![-0.5]);
        let cov = CovarianceSpec::new(vec![3.0]).unwrap();
        let inv = invariant_covariance(&op, &cov, 1).unwrap();
        let x = PolyField::coordinate(1, 0);
        let v = symmetric_form(&x, &x, &inv, &Quadrature::TensorHermite { nodes: 8 }).unwrap();
        assert!((v.value - 1.5).abs() < 1e-13);
    }

    #[test]
    fn green_formula_holds_for_polynomials() {
        let (op, cov, inv) = inv2();
        let q = Quadrature::TensorHermite { nodes: 12 };
        for seed in 0..5 {
            let p = PolyField::random(2, 3, seed);
            let w = PolyField::random(2, 2, 100 + seed);
            let th = SeparableGain { rate: 0.7, spatial: &p };
            let d = dual_pairing_check(&op, &cov, &inv, &th, &w, 0.3, &q).unwrap();
            assert!(d.gap() < 1e-9, "seed {seed}: {d:?}");
        }
    }
}
