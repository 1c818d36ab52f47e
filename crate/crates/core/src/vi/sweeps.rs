use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::ValueField;
use super::solve::{solve_penalized, solve_psor, PenaltyParams, PsorParams};
use super::DomainSpec;
use crate::problem::{GainSpec, GaussianMeasure};
use crate::sde::FiniteModel;
use crate::{Error, Result};

/// Tolerance for inequality assertions on solved fields.
pub const NUM_TOL: f64 = 1e-8;

/// Which obstacle solver a sweep uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolverChoice {
    Penalized { epsilon: f64 },
    Psor { omega: f64 },
}

pub fn solve_with(model: &FiniteModel, dom: &DomainSpec, choice: SolverChoice, steps: usize) -> Result<ValueField> {
    match choice {
        SolverChoice::Penalized { epsilon } => solve_penalized(model, dom, &PenaltyParams::new(epsilon, steps)),
        SolverChoice::Psor { omega } => {
            let mut p = PsorParams::new(steps);
            p.omega = omega;
            solve_psor(model, dom, &p)
        }
    }
}

/// Gaussian weights `ρ(x)·hⁿ` at all grid nodes, for Riemann sums of
/// `∫ · dμₙ` over the box (fields vanish outside it).
fn node_weights(dom: &DomainSpec, mu: &GaussianMeasure) -> Result<Vec<f64>> {
    if mu.dim() != dom.dim() {
        return Err(Error::Length {
            what: "measure dimension",
            expected: dom.dim(),
            got: mu.dim(),
        });
    }
    let cell: f64 = (0..dom.dim()).map(|k| dom.spacing(k)).product();
    let mut x = vec![0.0; dom.dim()];
    Ok((0..dom.len())
        .map(|i| {
            dom.node(i, &mut x);
            mu.density(&x) * cell
        })
        .collect())
}

/// `∫₀ᵀ ∫ g(k, node) dμₙ dt` by the trapezoid rule in time.
fn space_time_integral(levels: usize, dt: f64, weights: &[f64], g: impl Fn(usize, usize) -> f64) -> f64 {
    let mut total = 0.0;
    for k in 0..levels {
        let tw = if k == 0 || k + 1 == levels { 0.5 } else { 1.0 };
        let s: f64 = weights.iter().enumerate().map(|(i, w)| w * g(k, i)).sum();
        total += tw * dt * s;
    }
    total
}

/// `‖u_a − u_b‖` in `L²(0,T; L²(μ))` for two fields on the same grid.
pub fn l2_distance(a: &ValueField, b: &ValueField, mu: &GaussianMeasure) -> Result<f64> {
    if a.domain() != b.domain() || a.steps() != b.steps() {
        return Err(Error::Contract("fields live on different grids".into()));
    }
    let weights = node_weights(a.domain(), mu)?;
    let nodes = a.domain().len();
    let (ua, ub) = (a.u(), b.u());
    let sq = space_time_integral(a.steps() + 1, a.dt(), &weights, |k, i| {
        (ua[k * nodes + i] - ub[k * nodes + i]).powi(2)
    });
    Ok(sq.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PenaltyRow {
    pub epsilon: f64,
    /// `‖[−u_ε]⁺‖` in `L²(0,T; L²(μₙ))`.
    pub negative_part: f64,
    pub negative_sup: f64,
    /// `‖u_ε − u_PSOR‖` in `L²(0,T; L²(μₙ))`.
    pub distance_psor: f64,
    pub distance_sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PenaltySweep {
    pub rows: Vec<PenaltyRow>,
}

impl PenaltySweep {
    pub fn negative_part_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].negative_part < w[0].negative_part)
    }

    pub fn distance_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].distance_psor < w[0].distance_psor)
    }
}

fn check_strictly(values: &[f64], increasing: bool, what: &str) -> Result<()> {
    let ok = values
        .windows(2)
        .all(|w| if increasing { w[1] > w[0] } else { w[1] < w[0] });
    if !ok {
        let order = if increasing { "increasing" } else { "decreasing" };
        return Err(Error::Input(format!("{what} must be strictly {order}")));
    }
    Ok(())
}

/// Penalized solutions along a decreasing `ε` list against one PSOR
/// reference on the same grid.
pub fn penalty_sweep(
    model: &FiniteModel,
    dom: &DomainSpec,
    epsilons: &[f64],
    steps: usize,
    mu: &GaussianMeasure,
) -> Result<PenaltySweep> {
    if epsilons.len() < 3 {
        return Err(Error::Input("a penalty sweep needs at least 3 levels".into()));
    }
    check_strictly(epsilons, false, "penalty levels")?;
    let reference = solve_psor(model, dom, &PsorParams::new(steps))?;
    let weights = node_weights(dom, mu)?;
    let nodes = dom.len();
    let rows = epsilons
        .par_iter()
        .map(|&eps| {
            let f = solve_penalized(model, dom, &PenaltyParams::new(eps, steps))?;
            let u = f.u();
            let r = reference.u();
            let neg = space_time_integral(steps + 1, f.dt(), &weights, |k, i| {
                (-u[k * nodes + i]).max(0.0).powi(2)
            });
            let dist = space_time_integral(steps + 1, f.dt(), &weights, |k, i| {
                (u[k * nodes + i] - r[k * nodes + i]).powi(2)
            });
            Ok(PenaltyRow {
                epsilon: eps,
                negative_part: neg.sqrt(),
                negative_sup: u.iter().fold(0.0, |m, v| m.max(-v)),
                distance_psor: dist.sqrt(),
                distance_sup: u.iter().zip(r).fold(0.0, |m, (a, b)| m.max((a - b).abs())),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PenaltySweep { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DomainSweep {
    pub radii: Vec<f64>,
    pub probes: Vec<Vec<f64>>,
    /// `values[r][p] = U_{R_r}(0, probe_p)`.
    pub values: Vec<Vec<f64>>,
}

impl DomainSweep {
    /// `U_{R_{k+1}} ≥ U_{R_k} − tol` at every probe.
    pub fn monotone(&self, tol: f64) -> bool {
        self.values
            .windows(2)
            .all(|w| w[0].iter().zip(&w[1]).all(|(a, b)| *b >= a - tol))
    }

    /// `|U_{R_{k+1}} − U_{R_k}|` per consecutive pair and probe.
    pub fn differences(&self) -> Vec<Vec<f64>> {
        self.values
            .windows(2)
            .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (b - a).abs()).collect())
            .collect()
    }

    /// `|U_{k+2} − U_{k+1}| ≤ ratio·|U_{k+1} − U_k| + tol` for every probe.
    pub fn stabilizes(&self, ratio: f64, tol: f64) -> bool {
        self.differences()
            .windows(2)
            .all(|w| w[0].iter().zip(&w[1]).all(|(d0, d1)| *d1 <= ratio * d0 + tol))
    }
}

/// `U_R(0, probe)` for increasing radii on grids of common spacing, so that
/// every probe is a node of every grid.
pub fn domain_sweep(
    model: &FiniteModel,
    radii: &[f64],
    spacing: &[f64],
    probes: &[Vec<f64>],
    steps: usize,
    solver: SolverChoice,
) -> Result<DomainSweep> {
    check_strictly(radii, true, "radii")?;
    let r_min = radii[0];
    if let Some(p) = probes.iter().find(|p| p.iter().map(|v| v * v).sum::<f64>().sqrt() >= r_min) {
        return Err(Error::Input(format!("probe {p:?} lies outside the smallest ball")));
    }
    let values = radii
        .par_iter()
        .map(|&r| {
            let dom = DomainSpec::with_spacing(r, spacing)?;
            let field = solve_with(model, &dom, solver, steps)?;
            probes
                .iter()
                .map(|p| {
                    let flat = dom
                        .locate_node(p)
                        .ok_or_else(|| Error::Input(format!("probe {p:?} is not a grid node")))?;
                    Ok(field.big_u()[flat])
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DomainSweep {
        radii: radii.to_vec(),
        probes: probes.to_vec(),
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormAuditRow {
    pub p: f64,
    /// `‖u‖_{Lᵖ(0,T; Lᵖ(μₙ))}`.
    pub u_norm: f64,
    /// `2 Θ̄ T^{1/p}`.
    pub u_bound: f64,
    /// `‖Du‖_{Lᵖ(0,T; Lᵖ(μₙ))}` from grid differences.
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormAudit {
    pub rows: Vec<NormAuditRow>,
    /// `‖∂u/∂t‖_{L²(0,T; L²(μₙ))}`.
    pub dt_norm: f64,
}

impl NormAudit {
    pub fn within_bounds(&self) -> bool {
        self.rows.iter().all(|r| r.u_norm <= r.u_bound)
    }
}

/// Space-time norms of `u` with Riemann sums against `μₙ` over the grid.
pub fn norm_audit(field: &ValueField, gain: &GainSpec, mu: &GaussianMeasure, ps: &[f64]) -> Result<NormAudit> {
    let dom = field.domain();
    let weights = node_weights(dom, mu)?;
    let nodes = dom.len();
    let levels = field.steps() + 1;
    let n = dom.dim();
    let u = field.u();
    // |Du| at every node and level: central differences, one-sided at faces
    let mut grad = vec![0.0; u.len()];
    let mut idx = vec![0; n];
    for flat in 0..nodes {
        dom.multi_index(flat, &mut idx);
        for k in 0..levels {
            let base = k * nodes;
            let mut g2 = 0.0;
            for axis in 0..n {
                let s = dom.stride(axis);
                let h = dom.spacing(axis);
                let c = dom.counts()[axis];
                let d = if idx[axis] == 0 {
                    (u[base + flat + s] - u[base + flat]) / h
                } else if idx[axis] == c - 1 {
                    (u[base + flat] - u[base + flat - s]) / h
                } else {
                    (u[base + flat + s] - u[base + flat - s]) / (2.0 * h)
                };
                g2 += d * d;
            }
            grad[base + flat] = g2.sqrt();
        }
    }
    let theta_bar = gain.bounds().theta_max;
    let t_end = field.horizon();
    let rows = ps
        .iter()
        .map(|&p| {
            if !(p >= 1.0) {
                return Err(Error::Exponent {
                    p,
                    reason: "p must be >= 1",
                });
            }
            let un = space_time_integral(levels, field.dt(), &weights, |k, i| u[k * nodes + i].abs().powf(p));
            let gn = space_time_integral(levels, field.dt(), &weights, |k, i| grad[k * nodes + i].powf(p));
            Ok(NormAuditRow {
                p,
                u_norm: un.powf(1.0 / p),
                u_bound: 2.0 * theta_bar * t_end.powf(1.0 / p),
                grad_norm: gn.powf(1.0 / p),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    // backward differences between consecutive levels, midpoint in time
    let dt = field.dt();
    let mut acc = 0.0;
    for k in 0..field.steps() {
        let s: f64 = (0..nodes)
            .map(|i| weights[i] * ((u[(k + 1) * nodes + i] - u[k * nodes + i]) / dt).powi(2))
            .sum();
        acc += s * dt;
    }
    Ok(NormAudit {
        rows,
        dt_norm: acc.sqrt(),
    })
}
