//! Backward time marching for the obstacle problem
//! `max{∂u/∂t + L u + f, −u} = 0`, `u(T) = 0`, `u = 0` off `O_R`.
//!
//! With `t_k = kΔt`, a `θ`-step reads
//! `(I − θΔt L_h) u^k = (I + (1−θ)Δt L_h) u^{k+1} + Δt(θ f^k + (1−θ) f^{k+1})`
//! plus either the penalty `−(Δt/ε) min(u^k, 0)` on the left (solved by a
//! semismooth Newton iteration) or the complementarity constraint
//! `u^k ≥ 0` (solved by projected SOR).

use serde::{Deserialize, Serialize};

use super::discretize::SpatialOperator;
use super::field::{FieldMeta, SolveMethod, ValueField};
use super::sparse::{bicgstab, CsrMatrix};
use super::DomainSpec;
use crate::sde::FiniteModel;
use crate::{Error, Result};

/// Time discretization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeScheme {
    /// Weight `θ ∈ [½, 1]` on the new level.
    Theta { theta: f64 },
    /// Forward step for the linear part; requires `Δt·max|diag L_h| ≤ 1`.
    Explicit,
}

impl Default for TimeScheme {
    fn default() -> Self {
        TimeScheme::Theta { theta: 1.0 }
    }
}

impl TimeScheme {
    fn weight(&self) -> f64 {
        match *self {
            TimeScheme::Theta { theta } => theta,
            TimeScheme::Explicit => 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if let TimeScheme::Theta { theta } = *self {
            if !(0.5..=1.0).contains(&theta) {
                return Err(Error::Input(format!("theta must lie in [1/2, 1], got {theta}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyParams {
    pub epsilon: f64,
    #[serde(default)]
    pub scheme: TimeScheme,
    pub time_steps: usize,
    #[serde(default = "default_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_newton_iter")]
    pub max_iter: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsorParams {
    #[serde(default = "default_omega")]
    pub omega: f64,
    pub time_steps: usize,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_psor_iter")]
    pub max_iter: usize,
}

fn default_tol() -> f64 {
    1e-10
}
fn default_newton_iter() -> usize {
    50
}
fn default_omega() -> f64 {
    1.5
}
fn default_theta() -> f64 {
    1.0
}
fn default_psor_iter() -> usize {
    100_000
}

impl PenaltyParams {
    pub fn new(epsilon: f64, time_steps: usize) -> Self {
        Self {
            epsilon,
            scheme: TimeScheme::default(),
            time_steps,
            newton_tol: default_tol(),
            max_iter: default_newton_iter(),
        }
    }
}

impl PsorParams {
    pub fn new(time_steps: usize) -> Self {
        Self {
            omega: default_omega(),
            time_steps,
            theta: default_theta(),
            tol: default_tol(),
            max_iter: default_psor_iter(),
        }
    }
}

/// Linear tolerance for the inner solves, well below the outer ones.
const LINEAR_TOL: f64 = 1e-13;
const LINEAR_MAX_ITER: usize = 2000;

struct March<'a> {
    model: &'a FiniteModel,
    dom: &'a DomainSpec,
    op: SpatialOperator,
    steps: usize,
    dt: f64,
}

impl<'a> March<'a> {
    fn new(model: &'a FiniteModel, dom: &'a DomainSpec, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Input("time_steps must be >= 1".into()));
        }
        let op = SpatialOperator::new(model.coeffs(), dom)?;
        Ok(Self {
            model,
            dom,
            op,
            steps,
            dt: model.horizon() / steps as f64,
        })
    }

    /// Runs the backward march; `step` maps `(k, rhs, previous u)` to `u^k`.
    fn run<F>(&self, theta: f64, method: SolveMethod, mut step: F) -> Result<ValueField>
    where
        F: FnMut(usize, &[f64], &mut Vec<f64>) -> Result<()>,
    {
        let m = self.op.unknowns();
        let nodes = self.dom.len();
        let forcing = self.model.forcing();
        let l = self.op.matrix();
        let explicit_part = l.affine(1.0, (1.0 - theta) * self.dt);
        let mut u_all = vec![0.0; (self.steps + 1) * nodes];
        let mut u = vec![0.0; m];
        let mut f_next = vec![0.0; m];
        let mut f_now = vec![0.0; m];
        self.op.forcing(&forcing, self.model.horizon(), &mut f_next);
        let mut rhs = vec![0.0; m];
        for k in (0..self.steps).rev() {
            let t = k as f64 * self.dt;
            self.op.forcing(&forcing, t, &mut f_now);
            explicit_part.matvec(&u, &mut rhs);
            for j in 0..m {
                rhs[j] += self.dt * (theta * f_now[j] + (1.0 - theta) * f_next[j]);
            }
            step(k, &rhs, &mut u)?;
            self.op.scatter(&u, &mut u_all[k * nodes..(k + 1) * nodes]);
            std::mem::swap(&mut f_now, &mut f_next);
        }
        let gain = self.model.gain();
        let mut big_u = u_all.clone();
        let mut x = vec![0.0; self.dom.dim()];
        for flat in 0..nodes {
            self.dom.node(flat, &mut x);
            for k in 0..=self.steps {
                big_u[k * nodes + flat] += gain.value(k as f64 * self.dt, &x);
            }
        }
        Ok(ValueField::from_parts(
            self.dom.clone(),
            self.steps,
            self.model.horizon(),
            FieldMeta {
                rung: self.model.rung(),
                method,
                theta,
            },
            u_all,
            big_u,
        ))
    }
}

/// Penalized problem `∂u/∂t + L u = −f − (1/ε)[−u]⁺` by semismooth Newton.
pub fn solve_penalized(model: &FiniteModel, dom: &DomainSpec, pen: &PenaltyParams) -> Result<ValueField> {
    if !(pen.epsilon > 0.0 && pen.epsilon.is_finite()) {
        return Err(Error::Input(format!("penalty epsilon must be > 0, got {}", pen.epsilon)));
    }
    pen.scheme.validate()?;
    let march = March::new(model, dom, pen.time_steps)?;
    let theta = pen.scheme.weight();
    let dt = march.dt;
    let kappa = dt / pen.epsilon;
    let l = march.op.matrix();
    let m_mat = l.affine(1.0, -theta * dt);
    if pen.scheme == TimeScheme::Explicit {
        let ratio = dt * l.max_abs_diag();
        if ratio > 1.0 {
            return Err(Error::Stability { ratio });
        }
    }
    let n = march.op.unknowns();
    let mut active = vec![0.0; n];
    let mut resid = vec![0.0; n];
    let method = SolveMethod::Penalized { epsilon: pen.epsilon };
    march.run(theta, method, |k, rhs, u| {
        if theta == 0.0 {
            // M = I: the penalty equation decouples nodewise
            for j in 0..n {
                u[j] = if rhs[j] >= 0.0 { rhs[j] } else { rhs[j] / (1.0 + kappa) };
            }
            return Ok(());
        }
        let mut last = f64::INFINITY;
        for _ in 0..pen.max_iter {
            for j in 0..n {
                active[j] = if u[j] < 0.0 { kappa } else { 0.0 };
            }
            let jac = m_mat.plus_diagonal(&active);
            bicgstab(&jac, rhs, u, LINEAR_TOL, LINEAR_MAX_ITER)?;
            last = penalty_residual(&m_mat, kappa, rhs, u, &mut resid);
            let same_set = (0..n).all(|j| (u[j] < 0.0) == (active[j] > 0.0));
            if last <= pen.newton_tol && same_set {
                return Ok(());
            }
        }
        Err(Error::Newton {
            step: k,
            residual: last,
            iterations: pen.max_iter,
        })
    })
}

fn penalty_residual(m: &CsrMatrix, kappa: f64, rhs: &[f64], u: &[f64], out: &mut [f64]) -> f64 {
    m.matvec(u, out);
    let mut worst: f64 = 0.0;
    for j in 0..u.len() {
        let r = out[j] + kappa * u[j].min(0.0) - rhs[j];
        worst = worst.max(r.abs());
    }
    worst
}

/// Discrete complementarity problem at every step by projected SOR.
pub fn solve_psor(model: &FiniteModel, dom: &DomainSpec, params: &PsorParams) -> Result<ValueField> {
    if !(params.omega > 0.0 && params.omega < 2.0) {
        return Err(Error::Input(format!("relaxation weight must lie in (0, 2), got {}", params.omega)));
    }
    TimeScheme::Theta { theta: params.theta }.validate()?;
    let march = March::new(model, dom, params.time_steps)?;
    let dt = march.dt;
    let m_mat = march.op.matrix().affine(1.0, -params.theta * dt);
    let n = march.op.unknowns();
    let mut mu = vec![0.0; n];
    let omega = params.omega;
    let method = SolveMethod::Psor { omega };
    march.run(params.theta, method, |k, rhs, u| {
        for v in u.iter_mut() {
            *v = v.max(0.0);
        }
        let mut res = f64::INFINITY;
        for _ in 0..params.max_iter {
            for i in 0..n {
                let mut s = rhs[i];
                let mut diag = 0.0;
                for (j, a) in m_mat.row(i) {
                    if j == i {
                        diag = a;
                    } else {
                        s -= a * u[j];
                    }
                }
                let gs = s / diag;
                u[i] = (u[i] + omega * (gs - u[i])).max(0.0);
            }
            m_mat.matvec(u, &mut mu);
            res = (0..n).fold(0.0, |w, i| w.max(u[i].min(mu[i] - rhs[i]).abs()));
            if res <= params.tol {
                return Ok(());
            }
        }
        Err(Error::Psor { step: k, residual: res })
    })
}

/// Nodewise `r = max{∂u/∂t + L u + f, −u}` in the field's own
/// discretization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualStats {
    pub sup: f64,
    /// `(time level, flat node)` of the largest `|r|`.
    pub argmax: (usize, usize),
    /// `(∫₀ᵀ ∫ r² dμₙ dt)^{1/2}` by a grid Riemann sum.
    pub l2_mu: f64,
}

pub fn complementarity_residual(field: &ValueField, model: &FiniteModel) -> Result<ResidualStats> {
    let dom = field.domain();
    let op = SpatialOperator::new(model.coeffs(), dom)?;
    let forcing = model.forcing();
    let theta = field.meta().theta;
    let dt = field.dt();
    let m = op.unknowns();
    let lambdas = model.coeffs().lambdas();
    let cell: f64 = (0..dom.dim()).map(|k| dom.spacing(k)).product();
    let density: Vec<f64> = (0..m)
        .map(|j| {
            let x = op.point(j);
            x.iter()
                .zip(lambdas)
                .map(|(xi, l)| (-xi * xi / (2.0 * l)).exp() / (2.0 * std::f64::consts::PI * l).sqrt())
                .product::<f64>()
        })
        .collect();
    let (mut u_now, mut u_next) = (vec![0.0; m], vec![0.0; m]);
    let (mut lu_now, mut lu_next) = (vec![0.0; m], vec![0.0; m]);
    let (mut f_now, mut f_next) = (vec![0.0; m], vec![0.0; m]);
    let mut sup: f64 = 0.0;
    let mut argmax = (0, 0);
    let mut acc = 0.0;
    for k in 0..field.steps() {
        op.gather(field.u_level(k), &mut u_now);
        op.gather(field.u_level(k + 1), &mut u_next);
        op.matrix().matvec(&u_now, &mut lu_now);
        op.matrix().matvec(&u_next, &mut lu_next);
        op.forcing(&forcing, field.time(k), &mut f_now);
        op.forcing(&forcing, field.time(k + 1), &mut f_next);
        for j in 0..m {
            let pde = (u_next[j] - u_now[j]) / dt
                + theta * (lu_now[j] + f_now[j])
                + (1.0 - theta) * (lu_next[j] + f_next[j]);
            let r = pde.max(-u_now[j]);
            if r.abs() > sup {
                sup = r.abs();
                argmax = (k, op.interior()[j]);
            }
            acc += r * r * density[j] * cell * dt;
        }
    }
    Ok(ResidualStats {
        sup,
        argmax,
        l2_mu: acc.sqrt(),
    })
}
