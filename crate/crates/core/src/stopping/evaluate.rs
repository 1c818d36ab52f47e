use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rule::{contact_region, StoppingRule};
use crate::sde::{NoiseSource, PathSet, RULE_CHANNEL};
use crate::stats::MeanEstimate;
use crate::{Error, Result};

/// The optimal hitting rule and the perturbations it is compared against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RuleVariant {
    Optimal,
    /// Contact tested at `x + shift` instead of `x`.
    Shifted { shift: Vec<f64> },
    ForcedTerminal,
    Immediate,
    /// At each contact level, stop with probability `prob`.
    Randomized { prob: f64 },
    /// Stop `levels` field time levels after the first contact.
    Lagged { levels: usize },
}

impl RuleVariant {
    pub fn label(&self) -> String {
        match self {
            RuleVariant::Optimal => "optimal".into(),
            RuleVariant::Shifted { shift } => format!("shifted{shift:?}"),
            RuleVariant::ForcedTerminal => "forced_terminal".into(),
            RuleVariant::Immediate => "immediate".into(),
            RuleVariant::Randomized { prob } => format!("randomized({prob})"),
            RuleVariant::Lagged { levels } => format!("lagged({levels})"),
        }
    }

    /// The five comparison rules used by the optimality sandwich.
    pub fn perturbations(dim: usize, shift: f64, lag: usize) -> Vec<RuleVariant> {
        let mut s = vec![0.0; dim];
        s[0] = shift;
        vec![
            RuleVariant::Shifted { shift: s },
            RuleVariant::ForcedTerminal,
            RuleVariant::Immediate,
            RuleVariant::Randomized { prob: 0.5 },
            RuleVariant::Lagged { levels: lag },
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StopStats {
    pub rule: String,
    /// `E[Θ(τ, X_τ)]`.
    pub value: MeanEstimate,
    pub stop_time: MeanEstimate,
    /// `(t_k, paths stopped at level k)` over the field's time levels.
    pub stop_time_hist: Vec<(f64, usize)>,
    /// Share of paths stopped by leaving `O_R`.
    pub exit_fraction: f64,
}

/// How a path set lines up with the field's time grid.
#[derive(Debug, Clone, Copy)]
struct Alignment {
    first_level: usize,
    factor: usize,
}

fn align(paths: &dyn PathSet, rule: &StoppingRule) -> Result<Alignment> {
    let field = rule.field();
    if paths.rung() != rule.rung() {
        return Err(Error::Contract(format!(
            "paths simulated at {} but the field was solved at {}",
            paths.rung(),
            rule.rung()
        )));
    }
    if paths.dim() != field.domain().dim() {
        return Err(Error::Contract("path and field dimensions differ".into()));
    }
    let ratio = field.dt() / paths.dt();
    let factor = ratio.round();
    let s = paths.t0() / field.dt();
    let first = s.round();
    let ok = factor >= 1.0
        && (ratio - factor).abs() <= 1e-9 * ratio
        && (s - first).abs() <= 1e-9 * s.max(1.0)
        && (first as usize + paths.steps() / factor as usize) == field.steps()
        && paths.steps() % factor as usize == 0;
    if !ok {
        return Err(Error::Contract(format!(
            "path grid (t0 {}, dt {}, {} steps) is not a refinement of the field grid (dt {}, {} steps)",
            paths.t0(),
            paths.dt(),
            paths.steps(),
            field.dt(),
            field.steps()
        )));
    }
    Ok(Alignment {
        first_level: first as usize,
        factor: factor as usize,
    })
}

/// Where one path stopped: path step, field level (if on a level) and
/// whether it left `O_R`.
#[derive(Debug, Clone, Copy)]
struct Stop {
    step: usize,
    exited: bool,
}

fn outside(rule: &StoppingRule, x: &[f64]) -> bool {
    !rule.field().domain().is_interior_point(x)
}

fn first_stop(
    rule: &StoppingRule,
    al: Alignment,
    variant: &RuleVariant,
    states: &[f64],
    n: usize,
    noise: &NoiseSource,
    path: usize,
) -> Stop {
    let steps = states.len() / n - 1;
    let terminal = rule.field().steps();
    let mut rng = matches!(variant, RuleVariant::Randomized { .. }).then(|| noise.rng(path, RULE_CHANNEL));
    let mut first_contact: Option<usize> = None;
    let mut shifted = vec![0.0; n];
    for j in 0..=steps {
        let x = &states[j * n..(j + 1) * n];
        if outside(rule, x) {
            return Stop { step: j, exited: true };
        }
        if j % al.factor != 0 {
            continue;
        }
        let k = al.first_level + j / al.factor;
        if k == terminal {
            return Stop { step: j, exited: false };
        }
        let stop = match variant {
            RuleVariant::Optimal => rule.in_contact(k, x),
            RuleVariant::Shifted { shift } => {
                for ((s, xi), d) in shifted.iter_mut().zip(x).zip(shift) {
                    *s = xi + d;
                }
                rule.in_contact(k, &shifted)
            }
            RuleVariant::ForcedTerminal => false,
            RuleVariant::Immediate => true,
            RuleVariant::Randomized { prob } => {
                let draw: f64 = rng.as_mut().map(|r| r.random()).unwrap_or(1.0);
                rule.in_contact(k, x) && draw < *prob
            }
            RuleVariant::Lagged { levels } => {
                if first_contact.is_none() && rule.in_contact(k, x) {
                    first_contact = Some(k);
                }
                first_contact.is_some_and(|k0| k >= k0 + levels)
            }
        };
        if stop {
            return Stop { step: j, exited: false };
        }
    }
    Stop { step: steps, exited: false }
}

/// Evaluates a rule on every path of `paths` (parallel over paths,
/// reduced in path order).
pub fn stop_on_paths(paths: &dyn PathSet, rule: &StoppingRule, variant: &RuleVariant) -> Result<StopStats> {
    if let RuleVariant::Shifted { shift } = variant {
        if shift.len() != paths.dim() {
            return Err(Error::Length {
                what: "rule shift",
                expected: paths.dim(),
                got: shift.len(),
            });
        }
    }
    if let RuleVariant::Randomized { prob } = variant {
        if !(0.0..=1.0).contains(prob) {
            return Err(Error::Input(format!("stopping probability {prob} outside [0, 1]")));
        }
    }
    let al = align(paths, rule)?;
    let n = paths.dim();
    let noise = NoiseSource::new(paths.seed());
    let results = (0..paths.n_paths())
        .into_par_iter()
        .map_init(Vec::new, |buf, i| -> Result<(f64, usize, bool)> {
            paths.path_into(i, buf)?;
            let stop = first_stop(rule, al, variant, buf, n, &noise, i);
            let t = paths.t0() + stop.step as f64 * paths.dt();
            let value = rule.gain().value(t, &buf[stop.step * n..(stop.step + 1) * n]);
            Ok((value, stop.step, stop.exited))
        })
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = results.iter().map(|r| r.0).collect();
    let times: Vec<f64> = results
        .iter()
        .map(|r| paths.t0() + r.1 as f64 * paths.dt())
        .collect();
    let levels = rule.field().steps() - al.first_level;
    let mut hist = vec![0usize; levels + 1];
    for r in &results {
        hist[r.1 / al.factor] += 1;
    }
    let exits = results.iter().filter(|r| r.2).count();
    Ok(StopStats {
        rule: variant.label(),
        value: MeanEstimate::from_samples(&values),
        stop_time: MeanEstimate::from_samples(&times),
        stop_time_hist: hist
            .into_iter()
            .enumerate()
            .map(|(k, c)| (rule.field().time(al.first_level + k), c))
            .collect(),
        exit_fraction: exits as f64 / results.len() as f64,
    })
}

/// One cut time of the dynamic-programming check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleRow {
    pub sigma: f64,
    /// `E[U(σ ∧ τ*, X_{σ∧τ*})]`, expected to equal `U(t₀, x₀)`.
    pub capped: MeanEstimate,
    /// `E[U(σ, X_σ)]` ignoring `τ*` (stopped only at exit), expected `≤ U(t₀, x₀)`.
    pub uncapped: MeanEstimate,
    /// `E[Θ(σ ∧ τ*, X_{σ∧τ*})]`, expected `≤ U(t₀, x₀)`.
    pub gain: MeanEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleReport {
    /// `E[U(t₀, X_{t₀})]` read from the field (`U(t₀, x₀)` for a point start).
    pub target: f64,
    pub rows: Vec<MartingaleRow>,
}

impl MartingaleReport {
    /// Equality within `3·stderr + tol` and both one-sided bounds within
    /// `3·stderr + tol`.
    pub fn passes(&self, tol: f64) -> bool {
        self.rows.iter().all(|r| {
            (r.capped.mean - self.target).abs() <= 3.0 * r.capped.stderr + tol
                && r.uncapped.mean <= self.target + 3.0 * r.uncapped.stderr + tol
                && r.gain.mean <= self.target + 3.0 * r.gain.stderr + tol
        })
    }
}

/// `U` at path step `j`, with the gap interpolated in time between field
/// levels and `Θ` evaluated exactly.
fn value_at(rule: &StoppingRule, paths: &dyn PathSet, states: &[f64], n: usize, j: usize) -> f64 {
    let t = paths.t0() + j as f64 * paths.dt();
    let x = &states[j * n..(j + 1) * n];
    if outside(rule, x) {
        return rule.gain().value(t, x);
    }
    rule.field().u_at(t, x) + rule.gain().value(t, x)
}

pub fn martingale_check(paths: &dyn PathSet, rule: &StoppingRule, sigmas: &[f64]) -> Result<MartingaleReport> {
    let al = align(paths, rule)?;
    let n = paths.dim();
    let t_end = rule.field().horizon();
    let mut cut_steps = Vec::with_capacity(sigmas.len());
    for &s in sigmas {
        let r = (s - paths.t0()) / paths.dt();
        let j = r.round();
        if !(s >= paths.t0() - 1e-12 && s <= t_end + 1e-12) || (r - j).abs() > 1e-9 * r.max(1.0) {
            return Err(Error::Input(format!("cut time {s} is not a path time in [t0, T]")));
        }
        cut_steps.push(j as usize);
    }
    let noise = NoiseSource::new(paths.seed());
    // per path: U at the start, then [capped, uncapped, gain] per cut time
    let samples = (0..paths.n_paths())
        .into_par_iter()
        .map_init(Vec::new, |buf, i| -> Result<Vec<f64>> {
            paths.path_into(i, buf)?;
            let stop = first_stop(rule, al, &RuleVariant::Optimal, buf, n, &noise, i);
            let exit = (0..=paths.steps()).find(|&j| outside(rule, &buf[j * n..(j + 1) * n]));
            let mut out = Vec::with_capacity(1 + 3 * cut_steps.len());
            out.push(value_at(rule, paths, buf, n, 0));
            for &js in &cut_steps {
                let jc = js.min(stop.step);
                let ju = exit.map_or(js, |e| js.min(e));
                let t = paths.t0() + jc as f64 * paths.dt();
                out.push(value_at(rule, paths, buf, n, jc));
                out.push(value_at(rule, paths, buf, n, ju));
                out.push(rule.gain().value(t, &buf[jc * n..(jc + 1) * n]));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let column = |c: usize| -> MeanEstimate {
        let xs: Vec<f64> = samples.iter().map(|s| s[c]).collect();
        MeanEstimate::from_samples(&xs)
    };
    let target = column(0).mean;
    let rows = sigmas
        .iter()
        .enumerate()
        .map(|(s, &sigma)| MartingaleRow {
            sigma,
            capped: column(1 + 3 * s),
            uncapped: column(2 + 3 * s),
            gain: column(3 + 3 * s),
        })
        .collect();
    Ok(MartingaleReport { target, rows })
}

/// Value of the optimal rule for several contact tolerances.
pub fn delta_sensitivity(paths: &dyn PathSet, rule: &StoppingRule, deltas: &[f64]) -> Result<Vec<(f64, StopStats)>> {
    deltas
        .iter()
        .map(|&d| {
            let r = contact_region(rule.field(), rule.gain(), d)?;
            Ok((d, stop_on_paths(paths, &r, &RuleVariant::Optimal)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{GainSpec, Payoff, ProblemSpec, TimeFactor};
    use crate::sde::{FiniteModel, PathSampler, SimConfig};
    use crate::stopping::{lsmc_oracle, LsmcParams};
    use crate::vi::{solve_psor, DomainSpec, PsorParams};

    fn model(gain: GainSpec) -> FiniteModel {
        let p = ProblemSpec::canonical_put();
        let base = FiniteModel::from_problem(&p, None, 1).unwrap();
        FiniteModel::from_parts(base.coeffs().clone(), gain).unwrap()
    }

    fn setup(gain: GainSpec, paths: usize) -> (FiniteModel, StoppingRule, PathSampler) {
        let m = model(gain);
        let dom = DomainSpec::new(4.0, vec![81]).unwrap();
        let field = solve_psor(&m, &dom, &PsorParams::new(20)).unwrap();
        let rule = contact_region(&field, m.gain(), 1e-7).unwrap();
        let ps = PathSampler::new(m.clone(), SimConfig::new(vec![0.5], 40, paths, 5)).unwrap();
        (m, rule, ps)
    }

    #[test]
    fn constant_gain_stops_at_once() {
        let (_, rule, ps) = setup(GainSpec::constant(0.8, 1.0).unwrap(), 500);
        let s = stop_on_paths(&ps, &rule, &RuleVariant::Optimal).unwrap();
        assert_eq!(s.value.mean, 0.8);
        assert_eq!(s.value.stderr, 0.0);
        assert_eq!(s.stop_time.mean, 0.0);
        assert_eq!(s.stop_time_hist[0].1, 500);
        let mr = martingale_check(&ps, &rule, &[0.0, 0.5, 1.0]).unwrap();
        for r in &mr.rows {
            assert!((r.capped.mean - 0.8).abs() < 1e-14);
            assert!((r.uncapped.mean - 0.8).abs() < 1e-14);
        }
    }

    #[test]
    fn growing_gain_waits_to_the_end() {
        let g = GainSpec::new(
            Payoff::Constant { value: 1.0 },
            TimeFactor::Affine {
                intercept: 0.0,
                slope: 1.0,
            },
            1.0,
        )
        .unwrap();
        let (_, rule, ps) = setup(g, 300);
        let s = stop_on_paths(&ps, &rule, &RuleVariant::Optimal).unwrap();
        assert!((s.stop_time.mean - 1.0).abs() < 1e-12);
        assert_eq!(s.stop_time_hist.last().unwrap().1, 300);
    }

    #[test]
    fn forced_terminal_matches_direct_mean() {
        let p = ProblemSpec::canonical_put();
        let (m, rule, ps) = setup(p.gain.clone(), 2000);
        let s = stop_on_paths(&ps, &rule, &RuleVariant::ForcedTerminal).unwrap();
        let mut buf = Vec::new();
        let direct: Vec<f64> = (0..ps.n_paths())
            .map(|i| {
                ps.path_into(i, &mut buf).unwrap();
                let x = &buf[buf.len() - 1..];
                if x[0].abs() >= 4.0 {
                    // exits are stopped early by the rule; none expected here
                    f64::NAN
                } else {
                    m.gain().value(1.0, x)
                }
            })
            .collect();
        let est = MeanEstimate::from_samples(&direct);
        assert_eq!(s.exit_fraction, 0.0);
        assert!((s.value.mean - est.mean).abs() < 1e-14);
    }

    #[test]
    fn immediate_rule_is_exact() {
        let p = ProblemSpec::canonical_put();
        let (m, rule, ps) = setup(p.gain.clone(), 100);
        let s = stop_on_paths(&ps, &rule, &RuleVariant::Immediate).unwrap();
        assert_eq!(s.value.mean, m.gain().value(0.0, &[0.5]));
        assert_eq!(s.value.stderr, 0.0);
    }

    #[test]
    fn mismatched_rung_is_a_contract_error() {
        let p = ProblemSpec::canonical_put();
        let (_, rule, _) = setup(p.gain.clone(), 10);
        let other = FiniteModel::from_problem(&p, Some(8.0), 1).unwrap();
        let ps = PathSampler::new(other, SimConfig::new(vec![0.5], 40, 10, 1)).unwrap();
        assert!(matches!(
            stop_on_paths(&ps, &rule, &RuleVariant::Optimal),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn lsmc_constant_gain() {
        let m = model(GainSpec::constant(0.3, 1.0).unwrap());
        let a = PathSampler::new(m.clone(), SimConfig::new(vec![0.5], 40, 500, 1)).unwrap();
        let b = PathSampler::new(m.clone(), SimConfig::new(vec![0.5], 40, 500, 2)).unwrap();
        let e = lsmc_oracle(&a, &b, m.gain(), &LsmcParams { degree: 2, stride: 4, include_start: true }).unwrap();
        assert!((e.value.mean - 0.3).abs() < 1e-15);
        assert_eq!(e.value.stderr, 0.0);
    }

    #[test]
    fn lsmc_single_date_is_terminal_mean() {
        let p = ProblemSpec::canonical_put();
        let m = model(p.gain.clone());
        let a = PathSampler::new(m.clone(), SimConfig::new(vec![0.5], 40, 500, 1)).unwrap();
        let b = PathSampler::new(m.clone(), SimConfig::new(vec![0.5], 40, 500, 2)).unwrap();
        let params = LsmcParams {
            degree: 2,
            stride: 40,
            include_start: false,
        };
        let e = lsmc_oracle(&a, &b, m.gain(), &params).unwrap();
        let mut buf = Vec::new();
        let direct: Vec<f64> = (0..500)
            .map(|i| {
                b.path_into(i, &mut buf).unwrap();
                m.gain().value(1.0, &buf[40..41])
            })
            .collect();
        assert!((e.value.mean - MeanEstimate::from_samples(&direct).mean).abs() < 1e-15);
    }
}
