use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Eigenvalues `λ_1 ≥ λ_2 ≥ … ≥ λ_N > 0` of the covariance `Q` on the master
/// truncation. `N` is the master truncation level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct CovarianceSpec {
    lambdas: Vec<f64>,
}

impl CovarianceSpec {
    pub fn new(lambdas: Vec<f64>) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::Input("covariance needs at least one eigenvalue".into()));
        }
        for (index, &value) in lambdas.iter().enumerate() {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::NonPositiveEigenvalue { index, value });
            }
            if index > 0 && value > lambdas[index - 1] {
                return Err(Error::NotMonotone {
                    index,
                    prev: lambdas[index - 1],
                    next: value,
                });
            }
        }
        Ok(Self { lambdas })
    }

    pub fn n_master(&self) -> usize {
        self.lambdas.len()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// First `n` eigenvalues, i.e. the spectrum of `Q_n = P_n Q P_n`.
    pub fn head(&self, n: usize) -> Result<&[f64]> {
        self.check_dim(n)?;
        Ok(&self.lambdas[..n])
    }

    /// `Σ_{i ≤ n} λ_i`.
    pub fn partial_trace(&self, n: usize) -> Result<f64> {
        Ok(self.head(n)?.iter().sum())
    }

    pub fn check_dim(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.lambdas.len() {
            return Err(Error::Dimension {
                got: n,
                max: self.lambdas.len(),
            });
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for CovarianceSpec {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<CovarianceSpec> for Vec<f64> {
    fn from(c: CovarianceSpec) -> Self {
        c.lambdas
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_trace_sums_eigenvalues() {
        let c = CovarianceSpec::new(vec![1.0, 0.5, 0.25]).unwrap();
        assert_eq!(c.partial_trace(3).unwrap(), 1.75);
        assert_eq!(c.partial_trace(1).unwrap(), 1.0);
    }

    #[test]
    fn negative_eigenvalue_rejected() {
        let err = CovarianceSpec::new(vec![1.0, -0.1]).unwrap_err();
        assert!(matches!(err, Error::NonPositiveEigenvalue { index: 1, .. }));
    }

    #[test]
    fn increasing_eigenvalues_rejected() {
        assert!(matches!(
            CovarianceSpec::new(vec![0.5, 1.0]),
            Err(Error::NotMonotone { index: 1, .. })
        ));
    }

    #[test]
    fn dimension_out_of_range() {
        let c = CovarianceSpec::new(vec![1.0, 0.5]).unwrap();
        assert!(matches!(c.head(3), Err(Error::Dimension { got: 3, max: 2 })));
        assert!(matches!(c.head(0), Err(Error::Dimension { got: 0, .. })));
    }
}
