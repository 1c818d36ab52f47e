use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::problem::{CovarianceSpec, GainSpec, GaussianMeasure, OperatorSpec};
use crate::sde::{DriftScheme, FiniteModel, InitialState, PathSampler, PathSet, SimConfig};
use crate::stats::MeanEstimate;
use crate::{Error, Result};

/// Invariant law `N(0, Γ)` of `dX = AX dt + Q^{1/2} dB` for diagonal `A`,
/// `Γ = −½A⁻¹Q`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantMeasure {
    pub gamma: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub drift: Vec<f64>,
    /// Spectral gap: every `aᵢ ≤ −m`.
    pub gap: f64,
}

impl InvariantMeasure {
    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    pub fn trace(&self) -> f64 {
        self.gamma.iter().sum()
    }

    /// `Tr[Q A⁻¹]` (negative).
    pub fn trace_q_ainv(&self) -> f64 {
        self.lambdas.iter().zip(&self.drift).map(|(l, a)| l / a).sum()
    }

    pub fn measure(&self) -> Result<GaussianMeasure> {
        GaussianMeasure::from_variances(self.gamma.clone())
    }

    /// Relaxation horizon `8/m`.
    pub fn relaxation_horizon(&self) -> f64 {
        8.0 / self.gap
    }
}

pub fn invariant_covariance(op: &OperatorSpec, cov: &CovarianceSpec, n: usize) -> Result<InvariantMeasure> {
    let a = op
        .diagonal_entries()
        .ok_or_else(|| Error::Assumption("the invariant measure needs a diagonal operator".into()))?;
    if n == 0 || n > a.len() {
        return Err(Error::Dimension { got: n, max: a.len() });
    }
    let a = &a[..n];
    if let Some((i, v)) = a.iter().enumerate().find(|(_, v)| !(**v < 0.0)) {
        return Err(Error::Assumption(format!("a_{} = {v} is not negative", i + 1)));
    }
    let lambdas = cov.head(n)?.to_vec();
    let gamma = lambdas.iter().zip(a).map(|(l, ai)| l / (2.0 * ai.abs())).collect();
    let gap = a.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    Ok(InvariantMeasure {
        gamma,
        lambdas,
        drift: a.to_vec(),
        gap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvariantRow {
    pub coordinate: usize,
    pub gamma_theory: f64,
    pub gamma_empirical: f64,
    pub stderr: f64,
    pub horizon: f64,
    pub paths: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossRow {
    pub i: usize,
    pub j: usize,
    pub covariance: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantReport {
    pub rows: Vec<InvariantRow>,
    pub cross: Vec<CrossRow>,
    /// Variances at intermediate checkpoints `(t, per-coordinate estimate)`.
    pub checkpoints: Vec<(f64, Vec<MeanEstimate>)>,
}

impl InvariantReport {
    pub fn variances_within(&self, sds: f64) -> bool {
        self.rows
            .iter()
            .all(|r| (r.gamma_empirical - r.gamma_theory).abs() <= sds * r.stderr)
    }

    pub fn cross_within(&self, sds: f64) -> bool {
        self.cross.iter().all(|c| c.covariance.abs() <= sds * c.stderr)
    }

    /// CSV with columns `coordinate, gamma_theory, gamma_empirical, stderr,
    /// horizon, paths`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Where the simulation starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InvariantStart {
    Origin,
    Stationary,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantCheckConfig {
    pub horizon: f64,
    pub steps: usize,
    pub paths: usize,
    pub seed: u64,
    pub start: InvariantStart,
    /// Number of equally spaced checkpoints recorded before the horizon.
    pub checkpoints: usize,
}

/// Simulates the OU model with the trapezoidal (`θ = ½`) drift, whose
/// stationary variance is exactly `Γ` for any step, and compares the
/// empirical covariance at the horizon with `Γ`.
pub fn empirical_invariant_check(
    op: &OperatorSpec,
    cov: &CovarianceSpec,
    n: usize,
    cfg: &InvariantCheckConfig,
) -> Result<InvariantReport> {
    let inv = invariant_covariance(op, cov, n)?;
    let gain = GainSpec::constant(0.0, cfg.horizon)?;
    let model = FiniteModel::ou(op, cov, n, gain)?.with_scheme(DriftScheme::Theta { theta: 0.5 })?;
    let mut sim = SimConfig::new(vec![0.0; n], cfg.steps, cfg.paths, cfg.seed);
    if cfg.start == InvariantStart::Stationary {
        sim.initial = InitialState::Gaussian {
            mean: vec![0.0; n],
            variances: inv.gamma.clone(),
        };
    }
    let sampler = PathSampler::new(model, sim)?;
    let marks: Vec<usize> = (1..=cfg.checkpoints.max(1))
        .map(|c| c * cfg.steps / cfg.checkpoints.max(1))
        .collect();
    // per path: states at each checkpoint, the last one being the horizon
    let snaps = (0..cfg.paths)
        .into_par_iter()
        .map_init(Vec::new, |buf, i| -> Result<Vec<f64>> {
            sampler.path_into(i, buf)?;
            Ok(marks.iter().flat_map(|&k| buf[k * n..(k + 1) * n].to_vec()).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    let cross_moment = |m: usize, i: usize, j: usize| -> MeanEstimate {
        let base = m * n;
        let xi: Vec<f64> = snaps.iter().map(|s| s[base + i]).collect();
        let xj: Vec<f64> = snaps.iter().map(|s| s[base + j]).collect();
        let mi = MeanEstimate::from_samples(&xi).mean;
        let mj = MeanEstimate::from_samples(&xj).mean;
        let prod: Vec<f64> = xi.iter().zip(&xj).map(|(a, b)| (a - mi) * (b - mj)).collect();
        MeanEstimate::from_samples(&prod)
    };
    let last = marks.len() - 1;
    let rows = (0..n)
        .map(|i| {
            let v = cross_moment(last, i, i);
            InvariantRow {
                coordinate: i + 1,
                gamma_theory: inv.gamma[i],
                gamma_empirical: v.mean,
                stderr: v.stderr,
                horizon: cfg.horizon,
                paths: cfg.paths,
            }
        })
        .collect();
    let mut cross = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let c = cross_moment(last, i, j);
            cross.push(CrossRow {
                i: i + 1,
                j: j + 1,
                covariance: c.mean,
                stderr: c.stderr,
            });
        }
    }
    let dt = cfg.horizon / cfg.steps as f64;
    let checkpoints = marks
        .iter()
        .enumerate()
        .map(|(m, &k)| (k as f64 * dt, (0..n).map(|i| cross_moment(m, i, i)).collect()))
        .collect();
    Ok(InvariantReport {
        rows,
        cross,
        checkpoints,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn instance() -> (OperatorSpec, CovarianceSpec) {
        (
            OperatorSpec::diagonal(vec![-1.0, -2.0]),
            CovarianceSpec::new(vec![2.0, 1.0]).unwrap(),
        )
    }

    #[test]
    fn gamma_values() {
        let (op, cov) = instance();
        let inv = invariant_covariance(&op, &cov, 2).unwrap();
        assert_eq!(inv.gamma, vec![1.0, 0.25]);
        assert_eq!(inv.gap, 1.0);
        assert_eq!(inv.relaxation_horizon(), 8.0);
    }

    #[test]
    fn unstable_mode_is_rejected() {
        let op = OperatorSpec::diagonal(vec![1.0]);
        let cov = CovarianceSpec::new(vec![1.0]).unwrap();
        assert!(matches!(invariant_covariance(&op, &cov, 1), Err(Error::Assumption(_))));
    }

    #[test]
    fn small_sample_variances_are_close() {
        let (op, cov) = instance();
        let cfg = InvariantCheckConfig {
            horizon: 8.0,
            steps: 200,
            paths: 4000,
            seed: 3,
            start: InvariantStart::Origin,
            checkpoints: 2,
        };
        let r = empirical_invariant_check(&op, &cov, 2, &cfg).unwrap();
        assert!(r.variances_within(4.0), "{r:?}");
        assert!(r.cross_within(4.0), "{r:?}");
        assert_eq!(r.checkpoints.len(), 2);
    }
}
