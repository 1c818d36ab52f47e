use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::problem::{monomials, GainSpec};
use crate::sde::PathSet;
use crate::stats::MeanEstimate;
use crate::{Error, Result};

/// Regression Monte Carlo settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LsmcParams {
    /// Total degree of the polynomial basis.
    pub degree: u32,
    /// Exercise dates every `stride` path steps, ending at `T`.
    pub stride: usize,
    /// Whether stopping at the start time is allowed.
    pub include_start: bool,
}

impl Default for LsmcParams {
    fn default() -> Self {
        Self {
            degree: 3,
            stride: 8,
            include_start: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LsmcEstimate {
    /// Value of the regressed rule on the independent path set.
    pub value: MeanEstimate,
    pub dates: usize,
    pub basis: usize,
}

/// Continuation regression at one interior exercise date.
struct DateFit {
    mean: Vec<f64>,
    scale: Vec<f64>,
    beta: DVector<f64>,
}

fn features(x: &[f64], mean: &[f64], scale: &[f64], basis: &[Vec<u32>], out: &mut [f64]) {
    for (o, powers) in out.iter_mut().zip(basis) {
        *o = powers
            .iter()
            .enumerate()
            .map(|(i, &p)| ((x[i] - mean[i]) / scale[i]).powi(p as i32))
            .product();
    }
}

impl DateFit {
    fn continuation(&self, x: &[f64], basis: &[Vec<u32>], buf: &mut [f64]) -> f64 {
        features(x, &self.mean, &self.scale, basis, buf);
        buf.iter().zip(self.beta.iter()).map(|(a, b)| a * b).sum()
    }
}

/// Longstaff-Schwartz: continuation values regressed on polynomial
/// features along `train`, the resulting exercise rule evaluated on the
/// independent set `test`. Without arrest at `∂O_R`.
pub fn lsmc_oracle(train: &dyn PathSet, test: &dyn PathSet, gain: &GainSpec, params: &LsmcParams) -> Result<LsmcEstimate> {
    let n = train.dim();
    if test.dim() != n || test.steps() != train.steps() || (test.dt() - train.dt()).abs() > 1e-12 * train.dt() {
        return Err(Error::Contract("training and test path sets use different grids".into()));
    }
    if params.stride == 0 || train.steps() % params.stride != 0 {
        return Err(Error::Input(format!(
            "exercise stride {} must divide the {} path steps",
            params.stride,
            train.steps()
        )));
    }
    let dates = train.steps() / params.stride;
    let basis = monomials(n, params.degree);
    let time = |j: usize| train.t0() + j as f64 * train.dt();
    // states at exercise dates 1..=dates, date-major
    let p = train.n_paths();
    let snapshots = (0..p)
        .into_par_iter()
        .map_init(Vec::new, |buf, i| -> Result<Vec<f64>> {
            train.path_into(i, buf)?;
            let mut out = Vec::with_capacity(dates * n);
            for d in 1..=dates {
                let j = d * params.stride;
                out.extend_from_slice(&buf[j * n..(j + 1) * n]);
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let state = |i: usize, d: usize| &snapshots[i][(d - 1) * n..d * n];
    let mut cash: Vec<f64> = (0..p).map(|i| gain.value(time(dates * params.stride), state(i, dates))).collect();
    let mut fits: Vec<Option<DateFit>> = (0..dates).map(|_| None).collect();
    let mut row = vec![0.0; basis.len()];
    for d in (1..dates).rev() {
        let t = time(d * params.stride);
        let mut mean = vec![0.0; n];
        let mut scale = vec![0.0; n];
        for c in 0..n {
            let xs: Vec<f64> = (0..p).map(|i| state(i, d)[c]).collect();
            let est = MeanEstimate::from_samples(&xs);
            mean[c] = est.mean;
            let sd = est.stderr * (p as f64).sqrt();
            scale[c] = if sd > 0.0 { sd } else { 1.0 };
        }
        let mut design = DMatrix::zeros(p, basis.len());
        for i in 0..p {
            features(state(i, d), &mean, &scale, &basis, &mut row);
            for (c, v) in row.iter().enumerate() {
                design[(i, c)] = *v;
            }
        }
        let svd = design.svd(true, true);
        let smax = svd.singular_values.max();
        let rank = svd.singular_values.iter().filter(|&&s| s > 1e-10 * smax).count();
        if rank < basis.len() {
            return Err(Error::Basis {
                degree: params.degree as usize,
                rank,
                columns: basis.len(),
            });
        }
        let beta = svd
            .solve(&DVector::from_vec(cash.clone()), 0.0)
            .map_err(|_| Error::Basis {
                degree: params.degree as usize,
                rank,
                columns: basis.len(),
            })?;
        let fit = DateFit { mean, scale, beta };
        for i in 0..p {
            let x = state(i, d);
            let g = gain.value(t, x);
            if g >= fit.continuation(x, &basis, &mut row) {
                cash[i] = g;
            }
        }
        fits[d] = Some(fit);
    }
    let start_continuation = MeanEstimate::from_samples(&cash).mean;
    let values = (0..test.n_paths())
        .into_par_iter()
        .map_init(
            || (Vec::new(), vec![0.0; basis.len()]),
            |(buf, row), i| -> Result<f64> {
                test.path_into(i, buf)?;
                let x0 = &buf[..n];
                let g0 = gain.value(test.t0(), x0);
                if params.include_start && g0 >= start_continuation {
                    return Ok(g0);
                }
                for d in 1..dates {
                    let j = d * params.stride;
                    let x = &buf[j * n..(j + 1) * n];
                    let g = gain.value(time(j), x);
                    let fit = fits[d].as_ref().expect("fitted date");
                    if g >= fit.continuation(x, &basis, row) {
                        return Ok(g);
                    }
                }
                let j = dates * params.stride;
                Ok(gain.value(time(j), &buf[j * n..(j + 1) * n]))
            },
        )
        .collect::<Result<Vec<_>>>()?;
    Ok(LsmcEstimate {
        value: MeanEstimate::from_samples(&values),
        dates,
        basis: basis.len(),
    })
}
