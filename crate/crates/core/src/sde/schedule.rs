use serde::{Deserialize, Serialize};

use crate::{Error, Result};

fn one() -> f64 {
    1.0
}

/// Regularization levels `εₙ`. A schedule is admissible when `√n·εₙ` is
/// strictly decreasing on `1..=N_master`; a zero scale switches the extra
/// noise off altogether.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum EpsilonSchedule {
    /// `εₙ = scale / n`.
    Inverse {
        #[serde(default = "one")]
        scale: f64,
    },
    /// `εₙ = scale / (√n · ln(n + 1))`.
    InverseLog {
        #[serde(default = "one")]
        scale: f64,
    },
    /// Explicit values `ε₁, ε₂, …`.
    Custom { values: Vec<f64> },
}

impl EpsilonSchedule {
    fn raw(&self, n: usize) -> Result<f64> {
        let nf = n as f64;
        Ok(match self {
            EpsilonSchedule::Inverse { scale } => scale / nf,
            EpsilonSchedule::InverseLog { scale } => scale / (nf.sqrt() * (nf + 1.0).ln()),
            EpsilonSchedule::Custom { values } => *values.get(n - 1).ok_or_else(|| Error::Schedule {
                n,
                detail: format!("custom schedule has only {} entries", values.len()),
            })?,
        })
    }

    pub fn epsilon(&self, n: usize) -> Result<f64> {
        if n == 0 {
            return Err(Error::Dimension { got: 0, max: usize::MAX });
        }
        self.raw(n)
    }

    pub fn is_zero(&self) -> bool {
        match self {
            EpsilonSchedule::Inverse { scale } | EpsilonSchedule::InverseLog { scale } => *scale == 0.0,
            EpsilonSchedule::Custom { values } => values.iter().all(|v| *v == 0.0),
        }
    }

    /// Checks positivity and strict decrease of `√n·εₙ` up to `n_master`.
    pub fn validate(&self, n_master: usize) -> Result<()> {
        match self {
            EpsilonSchedule::Inverse { scale } | EpsilonSchedule::InverseLog { scale } => {
                if !(scale.is_finite() && *scale >= 0.0) {
                    return Err(Error::Schedule {
                        n: 1,
                        detail: format!("scale must be finite and >= 0, got {scale}"),
                    });
                }
                if *scale == 0.0 {
                    return Ok(());
                }
            }
            EpsilonSchedule::Custom { .. } => {}
        }
        let mut prev = f64::INFINITY;
        for n in 1..=n_master {
            let e = self.raw(n)?;
            if !(e.is_finite() && e > 0.0) {
                return Err(Error::Schedule {
                    n,
                    detail: format!("eps_n = {e} must be finite and positive"),
                });
            }
            let scaled = (n as f64).sqrt() * e;
            // relative slack so that round-off cannot fake a decrease
            if scaled >= prev * (1.0 - 1e-12) {
                return Err(Error::Schedule {
                    n,
                    detail: format!(
                        "sqrt(n)*eps_n = {scaled} does not decrease (previous {prev}); it must tend to 0"
                    ),
                });
            }
            prev = scaled;
        }
        Ok(())
    }
}

/// `εₙ` for the given rule.
pub fn epsilon_schedule(n: usize, rule: &EpsilonSchedule) -> Result<f64> {
    rule.epsilon(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_values() {
        let s = EpsilonSchedule::Inverse { scale: 1.0 };
        assert_eq!(epsilon_schedule(4, &s).unwrap(), 0.25);
        assert_eq!(epsilon_schedule(1, &s).unwrap(), 1.0);
        assert_eq!(4f64.sqrt() * s.epsilon(4).unwrap(), 0.5);
        s.validate(64).unwrap();
        EpsilonSchedule::InverseLog { scale: 1.0 }.validate(64).unwrap();
    }

    #[test]
    fn inverse_sqrt_is_rejected() {
        let s = EpsilonSchedule::Custom {
            values: (1..=8).map(|n| 1.0 / (n as f64).sqrt()).collect(),
        };
        assert!(matches!(s.validate(8), Err(Error::Schedule { n: 2, .. })));
    }

    #[test]
    fn short_custom_schedule_rejected() {
        let s = EpsilonSchedule::Custom { values: vec![0.5, 0.1] };
        assert!(s.validate(3).is_err());
        s.validate(2).unwrap();
    }
}
