//! The verification suites. Each check id maps to one task; tasks read
//! the solved fields from the output directory rather than sharing memory.

mod field;
mod ou;
mod paths;
mod solve;
mod sweeps;
mod trivial;

use stoplab_core::problem::GaussianMeasure;
use stoplab_core::sde::FiniteModel;
use stoplab_core::vi::DomainSpec;

use crate::config::{ExperimentConfig, SolveSection};
use crate::run::TaskCtx;

pub const FIELD_PENALIZED: &str = "field_penalized.bin";
pub const FIELD_PSOR: &str = "field_psor.bin";

pub fn needs_field(id: &str) -> bool {
    matches!(
        id,
        "field" | "obstacle" | "value_bounds" | "optimal_rule" | "dynamic_programming" | "lsmc"
    )
}

/// Short statement of the property each check verifies.
pub fn anchor(id: &str) -> &'static str {
    match id {
        "field" => "penalized and complementarity solvers agree",
        "obstacle" => "obstacle problem holds almost everywhere",
        "value_bounds" => "value bounded by the gain bound and Lipschitz in space",
        "optimal_rule" => "first hitting time of the contact set is optimal",
        "dynamic_programming" => "dynamic programming identity at deterministic times",
        "lsmc" => "regression Monte Carlo matches the PDE value",
        "penalty" => "penalized solutions converge to the obstacle solution",
        "domain" => "arrested values stabilize on compacts as R grows",
        "norm_audit" => "solution norms bounded uniformly in (R, eps, n, alpha)",
        "ladder" => "Yosida and Galerkin rungs converge pathwise",
        "trace" => "trace-class diagnostics of the drift",
        "invariant" => "symmetric OU invariant measure and Dirichlet form",
        "trivial" => "closed-form trivial instances",
        _ => "unknown",
    }
}

pub fn dispatch(id: &str, ctx: &mut TaskCtx<'_>) -> anyhow::Result<()> {
    match id {
        "field" => field::run(ctx),
        "obstacle" => solve::obstacle(ctx),
        "value_bounds" => solve::value_bounds(ctx),
        "optimal_rule" => paths::optimal_rule(ctx),
        "dynamic_programming" => paths::dynamic_programming(ctx),
        "lsmc" => paths::lsmc(ctx),
        "penalty" => sweeps::penalty(ctx),
        "domain" => sweeps::domain(ctx),
        "norm_audit" => sweeps::norm_audit(ctx),
        "ladder" => sweeps::ladder(ctx),
        "trace" => sweeps::trace(ctx),
        "invariant" => ou::invariant(ctx),
        "trivial" => trivial::run(ctx),
        other => anyhow::bail!("unknown task '{other}'"),
    }
}

fn solve_section(cfg: &ExperimentConfig) -> anyhow::Result<&SolveSection> {
    cfg.solve
        .as_ref()
        .ok_or_else(|| anyhow::anyhow!("configuration has no [solve] section"))
}

fn reference_model(cfg: &ExperimentConfig) -> anyhow::Result<FiniteModel> {
    let s = solve_section(cfg)?;
    Ok(FiniteModel::from_problem(&cfg.problem, s.alpha, s.n)?)
}

fn reference_domain(cfg: &ExperimentConfig) -> anyhow::Result<DomainSpec> {
    let s = solve_section(cfg)?;
    Ok(DomainSpec::with_spacing(s.radius, &s.spacing)?)
}

fn measure(cfg: &ExperimentConfig, n: usize) -> anyhow::Result<GaussianMeasure> {
    Ok(GaussianMeasure::new(&cfg.problem.covariance, n)?)
}

fn fmt(v: f64) -> String {
    v.to_string()
}

fn fmt_point(p: &[f64]) -> String {
    p.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}
