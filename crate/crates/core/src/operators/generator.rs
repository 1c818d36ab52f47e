use nalgebra::{DMatrix, SymmetricEigen};

use super::YosidaMatrix;
use crate::problem::{CovarianceSpec, DiffusionSpec, ScalarField};
use crate::{Error, Result};

/// Coefficients of the reduced generator
/// `L u = ½ Tr[B D²u] + ⟨A_{α,n} x, Du⟩` with `B = σσ* + diag(w²)`.
///
/// The weights `w` of the independent noise channels are all equal to `εₙ`
/// for the regularized ladder. The symmetric OU case uses `w_i = √λ_i` with
/// a vanishing scalar diffusion.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorCoefficients {
    drift: YosidaMatrix,
    lambdas: Vec<f64>,
    diffusion: DiffusionSpec,
    epsilon: f64,
    weights: Vec<f64>,
}

impl GeneratorCoefficients {
    /// Ladder coefficients with uniform regularizing weight `epsilon_n`.
    pub fn new(
        drift: YosidaMatrix,
        diffusion: DiffusionSpec,
        cov: &CovarianceSpec,
        epsilon_n: f64,
    ) -> Result<Self> {
        let n = drift.dim();
        Self::with_weights(drift, diffusion, cov, epsilon_n, vec![epsilon_n; n])
    }

    /// Coefficients with explicit per-channel noise weights.
    pub fn with_weights(
        drift: YosidaMatrix,
        diffusion: DiffusionSpec,
        cov: &CovarianceSpec,
        epsilon_n: f64,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let n = drift.dim();
        let lambdas = cov.head(n)?.to_vec();
        if !(epsilon_n >= 0.0 && epsilon_n.is_finite()) {
            return Err(Error::Input(format!("epsilon_n must be >= 0, got {epsilon_n}")));
        }
        if weights.len() != n {
            return Err(Error::Length {
                what: "noise weights",
                expected: n,
                got: weights.len(),
            });
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::NonFinite {
                what: "noise weight",
                coordinate: i,
            });
        }
        diffusion.validate()?;
        Ok(Self {
            drift,
            lambdas,
            diffusion,
            epsilon: epsilon_n,
            weights,
        })
    }

    pub fn dim(&self) -> usize {
        self.lambdas.len()
    }

    pub fn drift(&self) -> &YosidaMatrix {
        &self.drift
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn diffusion(&self) -> &DiffusionSpec {
        &self.diffusion
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Lower bound on the smallest eigenvalue of `B(x)`.
    pub fn ellipticity(&self) -> f64 {
        self.weights.iter().fold(f64::INFINITY, |m, w| m.min(w * w))
    }

    pub fn sigma(&self, x: &[f64], out: &mut [f64]) {
        self.diffusion.sigma(&self.lambdas, x, out);
    }

    pub fn drift_at(&self, x: &[f64], out: &mut [f64]) {
        self.drift.apply(x, out);
    }

    /// `B(x)` row-major.
    pub fn b_matrix(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        let mut s = vec![0.0; n];
        self.sigma(x, &mut s);
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = s[i] * s[j];
            }
            out[i * n + i] += self.weights[i] * self.weights[i];
        }
    }

    /// Smallest eigenvalue of `B(x)`.
    pub fn b_min_eigenvalue(&self, x: &[f64]) -> f64 {
        let n = self.dim();
        let mut b = vec![0.0; n * n];
        self.b_matrix(x, &mut b);
        let m = DMatrix::from_row_slice(n, n, &b);
        SymmetricEigen::new(m).eigenvalues.min()
    }

    /// `C̄(x) = ½(Tr[Dσ]σ + Dσ σ − 2A x − B Q⁻¹x)`; the `Q⁻¹x` factor is
    /// evaluated coordinatewise.
    pub fn cbar(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        let mut s = vec![0.0; n];
        let mut ds = vec![0.0; n];
        let mut ax = vec![0.0; n];
        self.sigma(x, &mut s);
        self.diffusion.dsigma_diag(&self.lambdas, x, &mut ds);
        self.drift.apply(x, &mut ax);
        let tr: f64 = ds.iter().sum();
        let qinv: Vec<f64> = x.iter().zip(&self.lambdas).map(|(xi, l)| xi / l).collect();
        let s_qinv: f64 = s.iter().zip(&qinv).map(|(a, b)| a * b).sum();
        for i in 0..n {
            let w2 = self.weights[i] * self.weights[i];
            out[i] = 0.5 * (tr * s[i] + ds[i] * s[i] - 2.0 * ax[i] - s[i] * s_qinv - w2 * qinv[i]);
        }
    }

    /// `(L u)(x)` for a field with exact derivatives.
    pub fn apply_generator(&self, u: &dyn ScalarField, x: &[f64]) -> f64 {
        let n = self.dim();
        let mut b = vec![0.0; n * n];
        let mut h = vec![0.0; n * n];
        let mut g = vec![0.0; n];
        let mut ax = vec![0.0; n];
        self.b_matrix(x, &mut b);
        u.hessian(x, &mut h);
        u.gradient(x, &mut g);
        self.drift.apply(x, &mut ax);
        let tr: f64 = b.iter().zip(&h).map(|(p, q)| p * q).sum();
        0.5 * tr + ax.iter().zip(&g).map(|(p, q)| p * q).sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{GammaFamily, OperatorSpec};

    fn one_dim(sigma: f64, eps: f64, a: f64) -> GeneratorCoefficients {
        let op = OperatorSpec::diagonal(vec![a]);
        GeneratorCoefficients::new(
            YosidaMatrix::exact(&op, 1).unwrap(),
            DiffusionSpec::constant(vec![sigma]),
            &CovarianceSpec::new(vec![1.0]).unwrap(),
            eps,
        )
        .unwrap()
    }

    #[test]
    fn scalar_b_and_cbar() {
        let c = one_dim(0.5, 0.1, -1.0);
        let mut b = [0.0];
        c.b_matrix(&[1.0], &mut b);
        assert!((b[0] - 0.26).abs() < 1e-15);
        let mut cb = [0.0];
        c.cbar(&[1.0], &mut cb);
        assert!((cb[0] - 0.87).abs() < 1e-15);
    }

    #[test]
    fn cbar_matches_finite_difference_divergence() {
        let op = OperatorSpec::diagonal(vec![-1.0, -2.0]);
        let cov = CovarianceSpec::new(vec![1.0, 0.5]).unwrap();
        let diff = DiffusionSpec::new(GammaFamily::SaturatedAffine {
            base: vec![0.4, 0.3],
            slope: vec![0.5, -0.2],
            width: vec![1.0, 0.7],
        })
        .unwrap();
        let c = GeneratorCoefficients::new(YosidaMatrix::exact(&op, 2).unwrap(), diff, &cov, 0.05)
            .unwrap();
        for x in [[0.0, 0.0], [0.3, -0.8]] {
            let h = 1e-6;
            // ½ Σ_j ∂_j B_ij − ½ (B Q⁻¹ x)_i − (A x)_i by differences
            let mut expect = [0.0; 2];
            let mut b0 = [0.0; 4];
            c.b_matrix(&x, &mut b0);
            for i in 0..2 {
                let mut div = 0.0;
                for j in 0..2 {
                    let mut xp = x;
                    let mut xm = x;
                    xp[j] += h;
                    xm[j] -= h;
                    let mut bp = [0.0; 4];
                    let mut bm = [0.0; 4];
                    c.b_matrix(&xp, &mut bp);
                    c.b_matrix(&xm, &mut bm);
                    div += (bp[i * 2 + j] - bm[i * 2 + j]) / (2.0 * h);
                }
                let bq: f64 = (0..2).map(|j| b0[i * 2 + j] * x[j] / cov.lambdas()[j]).sum();
                let ax = op.entry(i, i) * x[i];
                expect[i] = 0.5 * div - 0.5 * bq - ax;
            }
            let mut got = [0.0; 2];
            c.cbar(&x, &mut got);
            for i in 0..2 {
                assert!((got[i] - expect[i]).abs() < 1e-8, "{got:?} vs {expect:?}");
            }
        }
    }

    #[test]
    fn b_is_uniformly_elliptic_and_rank_one_plus_ridge() {
        let c = one_dim(0.0, 0.2, -1.0);
        assert!((c.b_min_eigenvalue(&[3.0]) - 0.04).abs() < 1e-15);
    }
}
