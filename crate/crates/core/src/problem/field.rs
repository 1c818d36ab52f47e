//! Smooth scalar fields on `ℝⁿ` with closed-form derivatives, used as test
//! functions for the bilinear forms and as trial functions in norm checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A scalar field with exact first and second derivatives.
pub trait ScalarField: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], out: &mut [f64]);
    /// Row-major `n × n` Hessian.
    fn hessian(&self, x: &[f64], out: &mut [f64]);
}

/// Polynomial `Σ c_k x^{e_k}` in monomial form.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyField {
    dim: usize,
    terms: Vec<(f64, Vec<u32>)>,
}

fn powi(x: f64, e: u32) -> f64 {
    x.powi(e as i32)
}

impl PolyField {
    /// Each term is a coefficient and an exponent vector of length `dim`.
    pub fn new(dim: usize, terms: Vec<(f64, Vec<u32>)>) -> Self {
        assert!(terms.iter().all(|(_, e)| e.len() == dim), "exponent length must equal dim");
        Self { dim, terms }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::new(dim, vec![(c, vec![0; dim])])
    }

    /// `x_i` as a field on `ℝⁿ`.
    pub fn coordinate(dim: usize, i: usize) -> Self {
        let mut e = vec![0; dim];
        e[i] = 1;
        Self::new(dim, vec![(1.0, e)])
    }

    /// All monomials of total degree `≤ degree`, with coefficients drawn
    /// uniformly from `[-1, 1]`.
    pub fn random(dim: usize, degree: u32, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let terms = monomials(dim, degree)
            .into_iter()
            .map(|e| (2.0 * rng.random::<f64>() - 1.0, e))
            .collect();
        Self::new(dim, terms)
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|(_, e)| e.iter().sum::<u32>()).max().unwrap_or(0)
    }

    pub fn terms(&self) -> &[(f64, Vec<u32>)] {
        &self.terms
    }
}

/// Exponent vectors of all monomials in `dim` variables with total degree
/// at most `degree`, in graded lexicographic order.
pub fn monomials(dim: usize, degree: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for total in 0..=degree {
        let mut current = vec![0u32; dim];
        fill(&mut out, &mut current, 0, total);
    }
    out
}

fn fill(out: &mut Vec<Vec<u32>>, current: &mut Vec<u32>, pos: usize, remaining: u32) {
    if pos + 1 == current.len() {
        current[pos] = remaining;
        out.push(current.clone());
        return;
    }
    if current.is_empty() {
        if remaining == 0 {
            out.push(Vec::new());
        }
        return;
    }
    for k in (0..=remaining).rev() {
        current[pos] = k;
        fill(out, current, pos + 1, remaining - k);
    }
    current[pos] = 0;
}

impl ScalarField for PolyField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, e)| c * e.iter().zip(x).map(|(&k, &xi)| powi(xi, k)).product::<f64>())
            .sum()
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (c, e) in &self.terms {
            for (j, o) in out.iter_mut().enumerate() {
                if e[j] == 0 {
                    continue;
                }
                let mut prod = *c * e[j] as f64;
                for (k, (&ek, &xk)) in e.iter().zip(x).enumerate() {
                    prod *= if k == j { powi(xk, ek - 1) } else { powi(xk, ek) };
                }
                *o += prod;
            }
        }
    }

    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim;
        out.iter_mut().for_each(|o| *o = 0.0);
        for (c, e) in &self.terms {
            for i in 0..n {
                for j in 0..n {
                    let factor = if i == j {
                        if e[i] < 2 {
                            continue;
                        }
                        (e[i] * (e[i] - 1)) as f64
                    } else {
                        if e[i] == 0 || e[j] == 0 {
                            continue;
                        }
                        (e[i] * e[j]) as f64
                    };
                    let mut prod = *c * factor;
                    for (k, (&ek, &xk)) in e.iter().zip(x).enumerate() {
                        let drop = u32::from(k == i) + u32::from(k == j);
                        prod *= powi(xk, ek - drop);
                    }
                    out[i * n + j] += prod;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monomial_count_matches_binomial() {
        // C(dim + degree, degree)
        assert_eq!(monomials(2, 3).len(), 10);
        assert_eq!(monomials(3, 2).len(), 10);
        assert_eq!(monomials(1, 4).len(), 5);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let p = PolyField::random(2, 3, 11);
        let x = [0.3, -0.7];
        let h = 1e-5;
        let mut g = [0.0; 2];
        let mut hess = [0.0; 4];
        p.gradient(&x, &mut g);
        p.hessian(&x, &mut hess);
        for k in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let fd = (p.value(&xp) - p.value(&xm)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-8);
            let mut gp = [0.0; 2];
            let mut gm = [0.0; 2];
            p.gradient(&xp, &mut gp);
            p.gradient(&xm, &mut gm);
            for j in 0..2 {
                assert!(((gp[j] - gm[j]) / (2.0 * h) - hess[j * 2 + k]).abs() < 1e-7);
            }
        }
    }
}
