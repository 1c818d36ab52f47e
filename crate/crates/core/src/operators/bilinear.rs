use super::GeneratorCoefficients;
use crate::problem::{Estimate, GaussianMeasure, Quadrature, ScalarField};
use crate::{Error, Result};

fn check(coeffs: &GeneratorCoefficients, mu: &GaussianMeasure) -> Result<()> {
    if mu.dim() != coeffs.dim() {
        return Err(Error::Length {
            what: "measure dimension",
            expected: coeffs.dim(),
            got: mu.dim(),
        });
    }
    let same = mu
        .variances()
        .iter()
        .zip(coeffs.lambdas())
        .all(|(a, b)| (a - b).abs() <= 1e-14 * b.abs());
    if !same {
        return Err(Error::Contract(
            "Gauss-weighted form requires the measure built from the same covariance".into(),
        ));
    }
    Ok(())
}

/// `a_μ(u, w) = ∫ ½⟨B Du, Dw⟩ dμₙ + ∫ ⟨C̄, Du⟩ w dμₙ`.
pub fn bilinear_form(
    coeffs: &GeneratorCoefficients,
    u: &dyn ScalarField,
    w: &dyn ScalarField,
    mu: &GaussianMeasure,
    method: &Quadrature,
) -> Result<Estimate> {
    check(coeffs, mu)?;
    let n = coeffs.dim();
    mu.integrate(
        |x| {
            let mut b = vec![0.0; n * n];
            let mut du = vec![0.0; n];
            let mut dw = vec![0.0; n];
            let mut c = vec![0.0; n];
            coeffs.b_matrix(x, &mut b);
            coeffs.cbar(x, &mut c);
            u.gradient(x, &mut du);
            w.gradient(x, &mut dw);
            let mut quad = 0.0;
            for i in 0..n {
                for j in 0..n {
                    quad += b[i * n + j] * du[j] * dw[i];
                }
            }
            let transport: f64 = c.iter().zip(&du).map(|(p, q)| p * q).sum();
            0.5 * quad + transport * w.value(x)
        },
        method,
    )
}

/// `∫ (L_{α,n} u) w dμₙ`. Green's identity gives
/// `a_μ(u, w) = −∫ (L u) w dμₙ` for smooth fields of polynomial growth.
pub fn generator_pairing(
    coeffs: &GeneratorCoefficients,
    u: &dyn ScalarField,
    w: &dyn ScalarField,
    mu: &GaussianMeasure,
    method: &Quadrature,
) -> Result<Estimate> {
    check(coeffs, mu)?;
    mu.integrate(|x| coeffs.apply_generator(u, x) * w.value(x), method)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::YosidaMatrix;
    use crate::problem::{CovarianceSpec, DiffusionSpec, OperatorSpec, PolyField};

    #[test]
    fn constant_u_gives_zero_and_identity_gives_half() {
        let op = OperatorSpec::diagonal(vec![0.0]);
        let cov = CovarianceSpec::new(vec![1.0]).unwrap();
        let c = GeneratorCoefficients::new(YosidaMatrix::exact(&op, 1).unwrap(), DiffusionSpec::zero(), &cov, 1.0)
            .unwrap();
        let mu = GaussianMeasure::new(&cov, 1).unwrap();
        let q = Quadrature::TensorHermite { nodes: 32 };
        let one = PolyField::constant(1, 3.0);
        let x = PolyField::coordinate(1, 0);
        assert_eq!(bilinear_form(&c, &one, &x, &mu, &q).unwrap().value, 0.0);
        // B ≡ 1 but C̄ = −½x here, and ∫ −½x·x dμ = −½ cancels ½∫1 dμ
        let v = bilinear_form(&c, &x, &x, &mu, &q).unwrap().value;
        assert!(v.abs() < 1e-14);
    }

    #[test]
    fn green_identity_scalar_constant_sigma() {
        let op = OperatorSpec::diagonal(vec![-0.7]);
        let cov = CovarianceSpec::new(vec![0.8]).unwrap();
        let c = GeneratorCoefficients::new(
            YosidaMatrix::new(&op, Some(4.0), 1).unwrap(),
            DiffusionSpec::constant(vec![0.5]),
            &cov,
            0.1,
        )
        .unwrap();
        let mu = GaussianMeasure::new(&cov, 1).unwrap();
        let q = Quadrature::TensorHermite { nodes: 32 };
        let x = PolyField::coordinate(1, 0);
        let a = bilinear_form(&c, &x, &x, &mu, &q).unwrap().value;
        let l = generator_pairing(&c, &x, &x, &mu, &q).unwrap().value;
        assert!((a + l).abs() < 1e-13);
    }
}
