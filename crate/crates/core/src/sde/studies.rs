//! Coupled Monte Carlo studies. Every model in a study is driven by the same
//! `(seed, path, channel)` increments, so the reported sup-norm differences
//! are pathwise couplings rather than differences of independent estimates.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::model::FiniteModel;
use super::noise::{coarsen, NoiseSource};
use crate::problem::ProblemSpec;
use crate::stats::{linear_fit, MeanEstimate};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub rung: String,
    pub param: f64,
    pub error_mean: f64,
    pub error_stderr: f64,
    pub paths: usize,
    pub steps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceReport {
    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.error_mean).collect()
    }

    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].error_mean < w[0].error_mean)
    }

    /// Columns `(rung, param, error_mean, error_stderr, paths, steps, seed)`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["rung", "param", "error_mean", "error_stderr", "paths", "steps", "seed"])?;
        for r in &self.rows {
            w.write_record([
                r.rung.clone(),
                r.param.to_string(),
                format!("{:.12e}", r.error_mean),
                format!("{:.6e}", r.error_stderr),
                r.paths.to_string(),
                r.steps.to_string(),
                r.seed.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs `model` from `x0` on increments with `channels` columns per step
/// (only the first `n + 1` are used) and returns `(steps + 1) × n` states.
fn run_coupled(model: &FiniteModel, x0: &[f64], inc: &[f64], channels: usize, dt: f64, path: usize) -> Result<Vec<f64>> {
    let n = model.dim();
    let steps = inc.len() / channels;
    let mut x = x0.to_vec();
    let mut out = Vec::with_capacity((steps + 1) * n);
    out.extend_from_slice(&x);
    let mut st = model.stepper(dt);
    for k in 0..steps {
        st.step(&mut x, &inc[k * channels..k * channels + n + 1]);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Simulation { path, step: k + 1 });
        }
        out.extend_from_slice(&x);
    }
    Ok(out)
}

/// `sup_k ‖embed(a_k) − b_k‖²` where `a` has `na ≤ nb` coordinates.
fn sup_sq_distance(a: &[f64], na: usize, b: &[f64], nb: usize) -> f64 {
    let steps = b.len() / nb;
    let mut worst: f64 = 0.0;
    for k in 0..steps {
        let xa = &a[k * na..(k + 1) * na];
        let xb = &b[k * nb..(k + 1) * nb];
        let mut d = 0.0;
        for i in 0..nb {
            let ai = if i < na { xa[i] } else { 0.0 };
            d += (ai - xb[i]).powi(2);
        }
        worst = worst.max(d);
    }
    worst
}

fn check_counts(paths: usize, steps: usize) -> Result<()> {
    if paths < 2 || steps == 0 {
        return Err(Error::Input("studies need at least 2 paths and 1 step".into()));
    }
    Ok(())
}

fn rows_from(samples: Vec<Vec<f64>>, labels: Vec<(String, f64)>, paths: usize, steps: usize, seed: u64) -> ConvergenceReport {
    let rows = labels
        .into_iter()
        .enumerate()
        .map(|(j, (rung, param))| {
            let col: Vec<f64> = samples.iter().map(|s| s[j]).collect();
            let est = MeanEstimate::from_samples(&col);
            ConvergenceRow {
                rung,
                param,
                error_mean: est.mean,
                error_stderr: est.stderr,
                paths,
                steps,
                seed,
            }
        })
        .collect();
    ConvergenceReport { rows }
}

/// `E sup_t ‖X^{(α)} − X^{(∞)}‖²` for each `α`, coupled on identical noise.
pub fn yosida_convergence_study(
    problem: &ProblemSpec,
    alphas: &[f64],
    n: usize,
    paths: usize,
    steps: usize,
    seed: u64,
) -> Result<ConvergenceReport> {
    check_counts(paths, steps)?;
    if !problem.operator.is_diagonal() {
        return Err(Error::Contract(
            "the Yosida study needs a diagonal operator so that the exact drift is simulable".into(),
        ));
    }
    let reference = FiniteModel::from_problem(problem, None, n)?;
    let models = alphas
        .iter()
        .map(|&a| FiniteModel::from_problem(problem, Some(a), n))
        .collect::<Result<Vec<_>>>()?;
    let x0 = problem.x0_head(n);
    let dt = problem.horizon() / steps as f64;
    let noise = NoiseSource::new(seed);
    let ch = n + 1;
    let samples = (0..paths)
        .into_par_iter()
        .map(|p| {
            let inc = noise.increments(p, ch, steps, dt);
            let r = run_coupled(&reference, &x0, &inc, ch, dt, p)?;
            models
                .iter()
                .map(|m| Ok(sup_sq_distance(&run_coupled(m, &x0, &inc, ch, dt, p)?, n, &r, n)))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let labels = alphas.iter().map(|&a| (format!("alpha={a},n={n}"), a)).collect();
    Ok(rows_from(samples, labels, paths, steps, seed))
}

/// `E sup_t ‖X^{(α);n} − X^{(α);N}‖²` for each `n`, where the master-level
/// path shares `W⁰` and `W¹…Wⁿ` with the reduced one.
pub fn galerkin_convergence_study(
    problem: &ProblemSpec,
    ns: &[usize],
    alpha: Option<f64>,
    paths: usize,
    steps: usize,
    seed: u64,
) -> Result<ConvergenceReport> {
    check_counts(paths, steps)?;
    let big = problem.n_master();
    if let Some(&bad) = ns.iter().find(|&&n| n == 0 || n > big) {
        return Err(Error::Dimension { got: bad, max: big });
    }
    let master = FiniteModel::from_problem(problem, alpha, big)?;
    let models = ns
        .iter()
        .map(|&n| FiniteModel::from_problem(problem, alpha, n))
        .collect::<Result<Vec<_>>>()?;
    let x_big = problem.x0_head(big);
    let dt = problem.horizon() / steps as f64;
    let noise = NoiseSource::new(seed);
    let ch = big + 1;
    let samples = (0..paths)
        .into_par_iter()
        .map(|p| {
            let inc = noise.increments(p, ch, steps, dt);
            let r = run_coupled(&master, &x_big, &inc, ch, dt, p)?;
            models
                .iter()
                .map(|m| {
                    let n = m.dim();
                    let xs = run_coupled(m, &x_big[..n], &inc, ch, dt, p)?;
                    Ok(sup_sq_distance(&xs, n, &r, big))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let a = alpha.map_or("inf".to_string(), |a| a.to_string());
    let labels = ns.iter().map(|&n| (format!("alpha={a},n={n}"), n as f64)).collect();
    Ok(rows_from(samples, labels, paths, steps, seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentRow {
    pub p: f64,
    pub steps: usize,
    pub mean: f64,
    pub stderr: f64,
}

/// `E sup_t ‖X‖ᵖ` at `steps` and at `2·steps` on coupled increments.
pub fn moment_study(
    model: &FiniteModel,
    x0: &[f64],
    steps: usize,
    paths: usize,
    seed: u64,
    ps: &[f64],
) -> Result<Vec<MomentRow>> {
    check_counts(paths, steps)?;
    let n = model.dim();
    let ch = n + 1;
    let fine_dt = model.horizon() / (2 * steps) as f64;
    let noise = NoiseSource::new(seed);
    let samples = (0..paths)
        .into_par_iter()
        .map(|p| {
            let fine = noise.increments(p, ch, 2 * steps, fine_dt);
            let coarse = coarsen(&fine, ch, 2);
            let mut out = Vec::with_capacity(2 * ps.len());
            for (inc, dt) in [(&coarse, 2.0 * fine_dt), (&fine, fine_dt)] {
                let xs = run_coupled(model, x0, inc, ch, dt, p)?;
                let sup = xs
                    .chunks_exact(n)
                    .map(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt())
                    .fold(0.0, f64::max);
                out.extend(ps.iter().map(|&q| sup.powf(q)));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (level, st) in [(0, steps), (1, 2 * steps)] {
        for (j, &q) in ps.iter().enumerate() {
            let col: Vec<f64> = samples.iter().map(|s| s[level * ps.len() + j]).collect();
            let est = MeanEstimate::from_samples(&col);
            rows.push(MomentRow {
                p: q,
                steps: st,
                mean: est.mean,
                stderr: est.stderr,
            });
        }
    }
    Ok(rows)
}

/// `E sup_t ‖Xˣ − Xʸ‖ / ‖x − y‖` on common noise.
pub fn lipschitz_surrogate(
    model: &FiniteModel,
    x: &[f64],
    y: &[f64],
    steps: usize,
    paths: usize,
    seed: u64,
) -> Result<MeanEstimate> {
    check_counts(paths, steps)?;
    let n = model.dim();
    let dist = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    if dist == 0.0 {
        return Err(Error::Input("start points must differ".into()));
    }
    let ch = n + 1;
    let dt = model.horizon() / steps as f64;
    let noise = NoiseSource::new(seed);
    let samples = (0..paths)
        .into_par_iter()
        .map(|p| {
            let inc = noise.increments(p, ch, steps, dt);
            let a = run_coupled(model, x, &inc, ch, dt, p)?;
            let b = run_coupled(model, y, &inc, ch, dt, p)?;
            Ok(sup_sq_distance(&a, n, &b, n).sqrt() / dist)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MeanEstimate::from_samples(&samples))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrongOrderReport {
    pub steps: Vec<usize>,
    /// Root-mean-square terminal error against the finest level.
    pub errors: Vec<f64>,
    pub order: f64,
}

/// Strong terminal error at `base·2^l` steps, `l < levels`, against a
/// reference with `base·2^levels` steps built from the same fine increments.
pub fn strong_order_study(
    model: &FiniteModel,
    x0: &[f64],
    base_steps: usize,
    levels: usize,
    paths: usize,
    seed: u64,
) -> Result<StrongOrderReport> {
    check_counts(paths, base_steps)?;
    if levels < 2 {
        return Err(Error::Input("need at least two levels to fit an order".into()));
    }
    let n = model.dim();
    let ch = n + 1;
    let fine_steps = base_steps << levels;
    let fine_dt = model.horizon() / fine_steps as f64;
    let noise = NoiseSource::new(seed);
    let samples = (0..paths)
        .into_par_iter()
        .map(|p| {
            let fine = noise.increments(p, ch, fine_steps, fine_dt);
            let reference = run_coupled(model, x0, &fine, ch, fine_dt, p)?;
            let xr = &reference[fine_steps * n..];
            (0..levels)
                .map(|l| {
                    let factor = 1 << (levels - l);
                    let inc = coarsen(&fine, ch, factor);
                    let xs = run_coupled(model, x0, &inc, ch, fine_dt * factor as f64, p)?;
                    let xt = &xs[xs.len() - n..];
                    Ok(xt.iter().zip(xr).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let steps: Vec<usize> = (0..levels).map(|l| base_steps << l).collect();
    let errors: Vec<f64> = (0..levels)
        .map(|l| {
            let col: Vec<f64> = samples.iter().map(|s| s[l]).collect();
            MeanEstimate::from_samples(&col).mean.sqrt()
        })
        .collect();
    let lx: Vec<f64> = steps.iter().map(|&s| (s as f64).ln()).collect();
    let ly: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let order = -linear_fit(&lx, &ly).0;
    Ok(StrongOrderReport { steps, errors, order })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{CovarianceSpec, DiffusionSpec, GainSpec, OperatorSpec, Payoff, TimeFactor};
    use crate::sde::EpsilonSchedule;

    fn small_problem(a: Vec<f64>, gamma: Vec<f64>, schedule: EpsilonSchedule) -> ProblemSpec {
        let n = a.len();
        let lambdas = (1..=n).map(|k| (k as f64).powi(-2)).collect();
        ProblemSpec::new(
            OperatorSpec::diagonal(a),
            CovarianceSpec::new(lambdas).unwrap(),
            DiffusionSpec::constant(gamma),
            GainSpec::new(
                Payoff::Put {
                    direction: vec![1.0],
                    strike: 1.0,
                    cap: 1.0,
                    smoothing: 0.05,
                },
                TimeFactor::One,
                1.0,
            )
            .unwrap(),
            schedule,
            vec![1.0],
        )
        .unwrap()
    }

    #[test]
    fn zero_operator_gives_zero_yosida_error() {
        let p = small_problem(vec![0.0], vec![0.5], EpsilonSchedule::Inverse { scale: 0.1 });
        let r = yosida_convergence_study(&p, &[1.0, 8.0], 1, 50, 16, 1).unwrap();
        assert!(r.errors().iter().all(|e| *e == 0.0));
    }

    #[test]
    fn master_level_galerkin_error_vanishes() {
        let p = small_problem(vec![-1.0, -2.0, -3.0], vec![0.5], EpsilonSchedule::Inverse { scale: 0.1 });
        let r = galerkin_convergence_study(&p, &[1, 3], None, 50, 16, 3).unwrap();
        assert!(r.rows[0].error_mean > 0.0);
        assert_eq!(r.rows[1].error_mean, 0.0);
    }

    #[test]
    fn galerkin_error_tracks_regularization_scale() {
        // γ ≡ 0 and a ≡ 0: the error is pure regularizing noise, whose
        // expected sup grows like (εₙ − ε_N)² n T + ε_N² (N − n) T.
        let n_master = 8;
        let p = small_problem(vec![0.0; n_master], vec![0.0], EpsilonSchedule::Inverse { scale: 1.0 });
        let ns = [1, 2, 4];
        let r = galerkin_convergence_study(&p, &ns, None, 2000, 32, 5).unwrap();
        let eps = |n: usize| 1.0 / n as f64;
        let predictor: Vec<f64> = ns
            .iter()
            .map(|&n| (eps(n) - eps(n_master)).powi(2) * n as f64 + eps(n_master).powi(2) * (n_master - n) as f64)
            .collect();
        let ratios: Vec<f64> = r.errors().iter().zip(&predictor).map(|(e, q)| e / q).collect();
        // one constant explains all levels within a factor of two
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().cloned().fold(0.0, f64::max);
        assert!(hi / lo < 2.0, "{ratios:?}");
        assert!(r.strictly_decreasing());
    }
}
