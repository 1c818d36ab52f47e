//! Instances with closed-form values. Each is solved on a small grid by
//! both obstacle solvers and, where a rule is involved, checked on paths.

use stoplab_core::problem::{CovarianceSpec, DiffusionSpec, GainSpec, OperatorSpec, Payoff, ProblemSpec, TimeFactor};
use stoplab_core::sde::{EpsilonSchedule, FiniteModel, PathSampler, SimConfig};
use stoplab_core::stopping::{contact_region, stop_on_paths, RuleVariant, DELTA_CONTACT};
use stoplab_core::vi::{solve_with, DomainSpec, SolverChoice, ValueField, NUM_TOL};

use super::anchor;
use crate::run::{CheckOutcome, TaskCtx};

/// Tolerance on closed-form values: the solvers' inequality tolerance.
pub const EXACT_TOL: f64 = NUM_TOL;
const PENALTY: f64 = 1e-6;
const CONSTANT: f64 = 0.7;
const PATHS: usize = 2000;
const STEPS: usize = 20;

/// `(name, gain, exact U(t, x), expected stopping time)`.
type Case = (&'static str, GainSpec, Box<dyn Fn(f64, f64) -> f64>, f64);

fn solvers() -> [SolverChoice; 2] {
    [SolverChoice::Penalized { epsilon: PENALTY }, SolverChoice::Psor { omega: 1.5 }]
}

/// The penalized solution sits below the obstacle by at most `ε·sup f⁻`,
/// and `|f| = |∂Θ/∂t|` is at most `L'_Θ` for these spatially flat gains.
fn tolerance(choice: SolverChoice, gain: &GainSpec) -> f64 {
    match choice {
        SolverChoice::Penalized { epsilon } => EXACT_TOL + epsilon * gain.bounds().lip_t,
        SolverChoice::Psor { .. } => EXACT_TOL,
    }
}

fn solver_label(c: SolverChoice) -> &'static str {
    match c {
        SolverChoice::Penalized { .. } => "penalized",
        SolverChoice::Psor { .. } => "psor",
    }
}

/// Largest deviation of `U` from `exact(t, x)` over nodes with `|x| ≤ 1`.
fn field_error(field: &ValueField, exact: impl Fn(f64, f64) -> f64) -> f64 {
    let dom = field.domain();
    let mut x = [0.0];
    let mut worst: f64 = 0.0;
    for k in 0..=field.steps() {
        let big = field.big_u_level(k);
        for flat in 0..dom.len() {
            dom.node(flat, &mut x);
            if x[0].abs() <= 1.0 {
                worst = worst.max((big[flat] - exact(field.time(k), x[0])).abs());
            }
        }
    }
    worst
}

fn affine(intercept: f64, slope: f64, payoff: Payoff, horizon: f64) -> anyhow::Result<GainSpec> {
    Ok(GainSpec::new(payoff, TimeFactor::Affine { intercept, slope }, horizon)?)
}

fn unit() -> Payoff {
    Payoff::Constant { value: 1.0 }
}

pub fn run(ctx: &mut TaskCtx<'_>) -> anyhow::Result<()> {
    let a = anchor("trivial");
    let t_end = ctx.cfg.problem.horizon();
    let base = FiniteModel::from_problem(&ctx.cfg.problem, None, 1)?;
    let dom = DomainSpec::new(6.0, vec![121])?;
    let cases: Vec<Case> = vec![
        ("constant", GainSpec::constant(CONSTANT, t_end)?, Box::new(|_, _| CONSTANT), 0.0),
        (
            "decaying",
            affine(t_end, -1.0, unit(), t_end)?,
            Box::new(move |t, _| t_end - t),
            0.0,
        ),
        ("growing", affine(0.0, 1.0, unit(), t_end)?, Box::new(move |_, _| t_end), t_end),
    ];
    let mut rows = Vec::new();
    for (name, gain, exact, stop_time) in cases {
        let model = FiniteModel::from_parts(base.coeffs().clone(), gain.clone())?;
        let mut psor = None;
        for choice in solvers() {
            let field = solve_with(&model, &dom, choice, STEPS)?;
            let err = field_error(&field, &exact);
            let label = solver_label(choice);
            rows.push(vec![name.to_string(), label.to_string(), format!("{err:.3e}")]);
            ctx.push(CheckOutcome::at_most(
                &format!("trivial.{name}.{label}"),
                a,
                err,
                0.0,
                tolerance(choice, model.gain()),
            ));
            if matches!(choice, SolverChoice::Psor { .. }) {
                psor = Some(field);
            }
        }
        let field = psor.expect("psor solved");
        let rule = contact_region(&field, model.gain(), DELTA_CONTACT)?;
        let sampler = PathSampler::new(model, SimConfig::new(vec![0.0], STEPS, PATHS, ctx.seed))?;
        let stats = stop_on_paths(&sampler, &rule, &RuleVariant::Optimal)?;
        let value_err = (stats.value.mean - exact(0.0, 0.0)).abs();
        ctx.push(
            CheckOutcome::at_most(&format!("trivial.{name}.rule_value"), a, value_err, 0.0, EXACT_TOL)
                .with_detail(format!("stderr {}", stats.value.stderr)),
        );
        let time_err = (stats.stop_time.mean - stop_time).abs();
        ctx.push(CheckOutcome::at_most(&format!("trivial.{name}.stop_time"), a, time_err, 0.0, EXACT_TOL));
    }

    // frozen dynamics: U(t, x) = sup_{s ≥ t} Θ(s, x) = Θ(T, x) for g increasing
    let payoff = Payoff::Put {
        direction: vec![1.0],
        strike: 0.0,
        cap: 1.0,
        smoothing: 0.05,
    };
    let gain = affine(1.0, 0.5, payoff, t_end)?;
    let frozen = ProblemSpec::new(
        OperatorSpec::diagonal(vec![0.0]),
        CovarianceSpec::new(vec![1.0])?,
        DiffusionSpec::zero(),
        gain.clone(),
        EpsilonSchedule::Inverse { scale: 0.0 },
        vec![0.0],
    )?;
    let model = FiniteModel::from_problem(&frozen, None, 1)?;
    for choice in solvers() {
        let field = solve_with(&model, &dom, choice, STEPS)?;
        let g = gain.clone();
        let err = field_error(&field, move |_, x| g.value(t_end, &[x]));
        let label = solver_label(choice);
        rows.push(vec!["frozen".into(), label.to_string(), format!("{err:.3e}")]);
        // f = ∂Θ/∂t ≥ 0 here, so the penalty term never acts
        ctx.push(CheckOutcome::at_most(&format!("trivial.frozen.{label}"), a, err, 0.0, EXACT_TOL));
    }
    ctx.write_csv("trivial.csv", &["case", "solver", "max_error"], &rows)?;
    Ok(())
}
