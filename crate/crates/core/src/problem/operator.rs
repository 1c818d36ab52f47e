use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Matrix of the drift generator `A` on the master truncation, in the
/// eigenbasis of `Q`: `a_ij = ⟨A φ_j, φ_i⟩` (units 1/time).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorSpec {
    Diagonal { entries: Vec<f64> },
    Dense { rows: Vec<Vec<f64>> },
}

impl OperatorSpec {
    pub fn diagonal(entries: Vec<f64>) -> Self {
        OperatorSpec::Diagonal { entries }
    }

    pub fn dim(&self) -> usize {
        match self {
            OperatorSpec::Diagonal { entries } => entries.len(),
            OperatorSpec::Dense { rows } => rows.len(),
        }
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self, OperatorSpec::Diagonal { .. })
    }

    pub fn diagonal_entries(&self) -> Option<&[f64]> {
        match self {
            OperatorSpec::Diagonal { entries } => Some(entries),
            OperatorSpec::Dense { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            OperatorSpec::Diagonal { entries } => {
                if let Some(i) = entries.iter().position(|a| !a.is_finite()) {
                    return Err(Error::NonFinite {
                        what: "operator diagonal",
                        coordinate: i,
                    });
                }
            }
            OperatorSpec::Dense { rows } => {
                let n = rows.len();
                for (i, row) in rows.iter().enumerate() {
                    if row.len() != n {
                        return Err(Error::Length {
                            what: "operator row",
                            expected: n,
                            got: row.len(),
                        });
                    }
                    if row.iter().any(|a| !a.is_finite()) {
                        return Err(Error::NonFinite {
                            what: "operator row",
                            coordinate: i,
                        });
                    }
                }
            }
        }
        if self.dim() == 0 {
            return Err(Error::Input("operator must have dimension >= 1".into()));
        }
        Ok(())
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match self {
            OperatorSpec::Diagonal { entries } => {
                if i == j {
                    entries[i]
                } else {
                    0.0
                }
            }
            OperatorSpec::Dense { rows } => rows[i][j],
        }
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| self.entry(i, j))
    }
}
