use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{CovarianceSpec, HermiteRule};
use crate::stats::pairwise_sum;
use crate::{Error, Result};

/// Largest dimension for which tensor Gauss–Hermite quadrature is offered.
pub const MAX_TENSOR_DIM: usize = 4;

/// How integrals against `μ_n` are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Quadrature {
    TensorHermite { nodes: usize },
    MonteCarlo { samples: usize, seed: u64 },
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature::TensorHermite { nodes: 64 }
    }
}

impl Quadrature {
    pub fn label(&self) -> &'static str {
        match self {
            Quadrature::TensorHermite { .. } => "tensor-hermite",
            Quadrature::MonteCarlo { .. } => "monte-carlo",
        }
    }

    pub fn count(&self, dim: usize) -> usize {
        match *self {
            Quadrature::TensorHermite { nodes } => nodes.pow(dim as u32),
            Quadrature::MonteCarlo { samples, .. } => samples,
        }
    }

    /// Tensor rule when feasible, seeded Monte Carlo otherwise.
    pub fn auto(dim: usize, nodes: usize, samples: usize, seed: u64) -> Self {
        if dim <= MAX_TENSOR_DIM {
            Quadrature::TensorHermite { nodes }
        } else {
            Quadrature::MonteCarlo { samples, seed }
        }
    }
}

/// Integral value with its standard error (zero for deterministic rules).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub count: usize,
}

/// The centered Gaussian measure `μ_n` on `ℝ^n` with covariance
/// `diag(λ_1, …, λ_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMeasure {
    lambdas: Vec<f64>,
    n_master: usize,
}

impl GaussianMeasure {
    pub fn new(cov: &CovarianceSpec, n: usize) -> Result<Self> {
        Ok(Self {
            lambdas: cov.head(n)?.to_vec(),
            n_master: cov.n_master(),
        })
    }

    /// Measure with arbitrary positive per-coordinate variances (used for the
    /// invariant measure of the symmetric OU case, whose variances need not be
    /// ordered).
    pub fn from_variances(variances: Vec<f64>) -> Result<Self> {
        for (index, &value) in variances.iter().enumerate() {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::NonPositiveEigenvalue { index, value });
            }
        }
        let n_master = variances.len();
        Ok(Self {
            lambdas: variances,
            n_master,
        })
    }

    pub fn dim(&self) -> usize {
        self.lambdas.len()
    }

    pub fn n_master(&self) -> usize {
        self.n_master
    }

    pub fn variances(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        self.lambdas
            .iter()
            .zip(x)
            .map(|(&l, &xi)| (-xi * xi / (2.0 * l)).exp() / (2.0 * std::f64::consts::PI * l).sqrt())
            .product()
    }

    /// Draw `count` points, row-major `count × n`.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sd: Vec<f64> = self.lambdas.iter().map(|l| l.sqrt()).collect();
        let mut out = Vec::with_capacity(count * sd.len());
        for _ in 0..count {
            for s in &sd {
                let z: f64 = StandardNormal.sample(&mut rng);
                out.push(s * z);
            }
        }
        out
    }

    /// Tensor Gauss–Hermite nodes and weights adapted to this measure.
    pub fn tensor_grid(&self, nodes: usize) -> Result<TensorGrid> {
        let dim = self.dim();
        if dim > MAX_TENSOR_DIM {
            return Err(Error::Quadrature(format!(
                "tensor Hermite quadrature limited to n <= {MAX_TENSOR_DIM}, got n = {dim}"
            )));
        }
        let rule = HermiteRule::new(nodes);
        let total = nodes.pow(dim as u32);
        let mut points = Vec::with_capacity(total * dim);
        let mut weights = Vec::with_capacity(total);
        let mut idx = vec![0usize; dim];
        for _ in 0..total {
            let mut w = 1.0;
            for (k, &i) in idx.iter().enumerate() {
                points.push(self.lambdas[k].sqrt() * rule.nodes[i]);
                w *= rule.weights[i];
            }
            weights.push(w);
            for slot in idx.iter_mut().rev() {
                *slot += 1;
                if *slot < nodes {
                    break;
                }
                *slot = 0;
            }
        }
        Ok(TensorGrid {
            dim,
            points,
            weights,
        })
    }

    /// `∫ f dμ_n` by the requested method.
    pub fn integrate<F>(&self, f: F, method: &Quadrature) -> Result<Estimate>
    where
        F: Fn(&[f64]) -> f64,
    {
        match *method {
            Quadrature::TensorHermite { nodes } => self.tensor_grid(nodes)?.integrate(f),
            Quadrature::MonteCarlo { samples, seed } => {
                if samples < 2 {
                    return Err(Error::Quadrature("Monte Carlo needs at least 2 samples".into()));
                }
                let dim = self.dim();
                let pts = self.sample(samples, seed);
                let mut vals = Vec::with_capacity(samples);
                for (i, x) in pts.chunks_exact(dim).enumerate() {
                    let v = f(x);
                    if !v.is_finite() {
                        return Err(Error::Quadrature(format!(
                            "non-finite integrand at Monte Carlo sample {i}"
                        )));
                    }
                    vals.push(v);
                }
                let est = crate::stats::MeanEstimate::from_samples(&vals);
                Ok(Estimate {
                    value: est.mean,
                    stderr: est.stderr,
                    count: samples,
                })
            }
        }
    }
}

/// Precomputed tensor quadrature for repeated integration against one
/// measure.
#[derive(Debug, Clone)]
pub struct TensorGrid {
    dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl TensorGrid {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.points.chunks_exact(self.dim).zip(self.weights.iter().copied())
    }

    pub fn integrate<F>(&self, f: F) -> Result<Estimate>
    where
        F: Fn(&[f64]) -> f64,
    {
        let mut terms = Vec::with_capacity(self.len());
        for (i, (x, w)) in self.points().enumerate() {
            let v = f(x);
            if !v.is_finite() {
                return Err(Error::Quadrature(format!(
                    "non-finite integrand at tensor node {i}"
                )));
            }
            terms.push(w * v);
        }
        Ok(Estimate {
            value: pairwise_sum(&terms),
            stderr: 0.0,
            count: self.len(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn measure(lambdas: &[f64]) -> GaussianMeasure {
        GaussianMeasure::new(&CovarianceSpec::new(lambdas.to_vec()).unwrap(), lambdas.len()).unwrap()
    }

    #[test]
    fn standard_normal_density_at_origin() {
        let mu = measure(&[1.0]);
        assert!((mu.density(&[0.0]) - 0.398_942_280_401_432_7).abs() < 1e-15);
    }

    #[test]
    fn tensor_quadrature_normalizes() {
        let mu = measure(&[1.0, 0.5, 0.25]);
        let est = mu.integrate(|_| 1.0, &Quadrature::TensorHermite { nodes: 16 }).unwrap();
        assert!((est.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn monte_carlo_normalizes_and_recovers_variance() {
        let mu = measure(&[1.0, 0.5]);
        let q = Quadrature::MonteCarlo { samples: 20_000, seed: 7 };
        let one = mu.integrate(|_| 1.0, &q).unwrap();
        assert_eq!(one.value, 1.0);
        let var = mu.integrate(|x| x[1] * x[1], &q).unwrap();
        assert!((var.value - 0.5).abs() < 3.0 * var.stderr + 1e-12);
    }

    #[test]
    fn tensor_rejects_large_dimension() {
        let mu = measure(&[1.0, 0.9, 0.8, 0.7, 0.6]);
        assert!(matches!(mu.tensor_grid(4), Err(Error::Quadrature(_))));
    }

    #[test]
    fn non_finite_integrand_is_reported() {
        let mu = measure(&[1.0]);
        let r = mu.integrate(|x| 1.0 / (x[0] - x[0]), &Quadrature::TensorHermite { nodes: 4 });
        assert!(matches!(r, Err(Error::Quadrature(_))));
    }
}
