//! Monte Carlo checks of the stopping rule read off the PSOR field.

use stoplab_core::sde::{PathSampler, SimConfig};
use stoplab_core::stopping::{
    contact_region, delta_sensitivity, lsmc_oracle, martingale_check, stop_on_paths, write_free_boundary_csv,
    LsmcParams, RuleVariant, StopStats, StoppingRule,
};

use super::solve::lattice_values;
use super::{anchor, fmt, reference_model, solve_section, FIELD_PSOR};
use crate::config::PathSection;
use crate::run::{CheckOutcome, TaskCtx};

/// Absolute slack added to the `3·stderr` band of the optimality checks.
pub const RULE_TOL: f64 = 5e-3;
/// Absolute slack of the regression Monte Carlo comparison.
pub const LSMC_TOL: f64 = 1e-2;
/// Contact tolerances of the sensitivity table.
const DELTAS: [f64; 3] = [1e-7, 1e-6, 1e-5];
/// Path budget of the sensitivity table.
const SENSITIVITY_PATHS: usize = 10_000;

fn path_section(ctx: &TaskCtx<'_>) -> anyhow::Result<PathSection> {
    ctx.cfg
        .paths
        .clone()
        .ok_or_else(|| anyhow::anyhow!("configuration has no [paths] section"))
}

struct Setup {
    rule: StoppingRule,
    sampler: PathSampler,
    x0: Vec<f64>,
    value: f64,
}

fn setup(ctx: &TaskCtx<'_>, count: usize, seed: u64) -> anyhow::Result<Setup> {
    let s = solve_section(ctx.cfg)?;
    let p = path_section(ctx)?;
    let model = reference_model(ctx.cfg)?;
    let field = ctx.read_field(FIELD_PSOR)?;
    let rule = contact_region(&field, model.gain(), s.delta_contact)?;
    let x0 = ctx.cfg.x0(s.n);
    let value = field
        .value0(&x0)
        .ok_or_else(|| anyhow::anyhow!("start point outside the grid"))?;
    let sampler = PathSampler::new(model, SimConfig::new(x0.clone(), p.steps, count, seed))?;
    Ok(Setup {
        rule,
        sampler,
        x0,
        value,
    })
}

fn stats_row(s: &StopStats) -> Vec<String> {
    vec![
        s.rule.clone(),
        format!("{:.10e}", s.value.mean),
        format!("{:.6e}", s.value.stderr),
        format!("{:.10e}", s.stop_time.mean),
        format!("{:.6}", s.exit_fraction),
        s.value.count.to_string(),
    ]
}

const STATS_HEADER: [&str; 6] = ["rule", "value", "stderr", "stop_time", "exit_fraction", "paths"];

pub fn optimal_rule(ctx: &mut TaskCtx<'_>) -> anyhow::Result<()> {
    let p = path_section(ctx)?;
    let st = setup(ctx, p.count, ctx.seed)?;
    let a = anchor("optimal_rule");
    let n = st.x0.len();
    let optimal = stop_on_paths(&st.sampler, &st.rule, &RuleVariant::Optimal)?;
    let mut rows = vec![stats_row(&optimal)];
    let gap = (optimal.value.mean - st.value).abs();
    ctx.push(
        CheckOutcome::at_most("optimal_rule.value", a, gap, 3.0 * optimal.value.stderr, RULE_TOL)
            .with_detail(format!("rule {} vs field {}", optimal.value.mean, st.value)),
    );
    let mut hist_rows: Vec<Vec<String>> = optimal
        .stop_time_hist
        .iter()
        .map(|(t, c)| vec!["optimal".into(), fmt(*t), c.to_string()])
        .collect();
    for v in RuleVariant::perturbations(n, p.shift, p.lag) {
        let s = stop_on_paths(&st.sampler, &st.rule, &v)?;
        ctx.push(
            CheckOutcome::at_most(
                &format!("optimal_rule.dominates.{}", v.label()),
                a,
                s.value.mean,
                st.value + 3.0 * s.value.stderr,
                0.0,
            )
            .with_detail(format!("stderr {}", s.value.stderr)),
        );
        hist_rows.extend(
            s.stop_time_hist
                .iter()
                .map(|(t, c)| vec![s.rule.clone(), fmt(*t), c.to_string()]),
        );
        rows.push(stats_row(&s));
    }
    ctx.write_csv("stop_rules.csv", &STATS_HEADER, &rows)?;
    ctx.write_csv("stop_times.csv", &["rule", "t", "stopped"], &hist_rows)?;

    let slices: Vec<Vec<String>> = st
        .rule
        .contact_slices()
        .iter()
        .map(|c| vec![fmt(c.t), c.nodes.to_string(), format!("{:.10e}", c.area)])
        .collect();
    ctx.write_csv("contact.csv", &["t", "nodes", "area"], &slices)?;
    if n == 1 {
        let mut bytes = Vec::new();
        write_free_boundary_csv(&mut bytes, &st.rule.free_boundary()?)?;
        ctx.write("free_boundary.csv", &bytes)?;
    }

    let small = setup(ctx, p.count.min(SENSITIVITY_PATHS), ctx.seed)?;
    let sens = delta_sensitivity(&small.sampler, &small.rule, &DELTAS)?;
    let sens_rows: Vec<Vec<String>> = sens
        .iter()
        .map(|(d, s)| {
            let mut r = vec![format!("{d:e}")];
            r.extend(stats_row(s).into_iter().skip(1));
            r
        })
        .collect();
    ctx.write_csv(
        "delta_sensitivity.csv",
        &["delta", "value", "stderr", "stop_time", "exit_fraction", "paths"],
        &sens_rows,
    )?;
    Ok(())
}

pub fn dynamic_programming(ctx: &mut TaskCtx<'_>) -> anyhow::Result<()> {
    let p = path_section(ctx)?;
    let st = setup(ctx, p.count, ctx.seed)?;
    let report = martingale_check(&st.sampler, &st.rule, &p.sigmas)?;
    let a = anchor("dynamic_programming");
    let mut rows = Vec::new();
    for r in &report.rows {
        let gap = (r.capped.mean - report.target).abs();
        ctx.push(CheckOutcome::at_most(
            &format!("dynamic_programming.capped.sigma={}", r.sigma),
            a,
            gap,
            3.0 * r.capped.stderr,
            RULE_TOL,
        ));
        ctx.push(CheckOutcome::at_most(
            &format!("dynamic_programming.uncapped.sigma={}", r.sigma),
            a,
            r.uncapped.mean,
            report.target + 3.0 * r.uncapped.stderr,
            RULE_TOL,
        ));
        ctx.push(CheckOutcome::at_most(
            &format!("dynamic_programming.gain.sigma={}", r.sigma),
            a,
            r.gain.mean,
            report.target + 3.0 * r.gain.stderr,
            RULE_TOL,
        ));
        rows.push(vec![
            fmt(r.sigma),
            format!("{:.10e}", report.target),
            format!("{:.10e}", r.capped.mean),
            format!("{:.6e}", r.capped.stderr),
            format!("{:.10e}", r.uncapped.mean),
            format!("{:.6e}", r.uncapped.stderr),
            format!("{:.10e}", r.gain.mean),
            format!("{:.6e}", r.gain.stderr),
        ]);
    }
    ctx.write_csv(
        "martingale.csv",
        &[
            "sigma",
            "target",
            "capped",
            "capped_stderr",
            "uncapped",
            "uncapped_stderr",
            "gain",
            "gain_stderr",
        ],
        &rows,
    )?;
    Ok(())
}

pub fn lsmc(ctx: &mut TaskCtx<'_>) -> anyhow::Result<()> {
    let p = path_section(ctx)?;
    let s = solve_section(ctx.cfg)?.clone();
    let model = reference_model(ctx.cfg)?;
    let x0 = ctx.cfg.x0(s.n);
    let train = PathSampler::new(model.clone(), SimConfig::new(x0.clone(), p.steps, p.lsmc_paths, ctx.seed))?;
    let test = PathSampler::new(
        model.clone(),
        SimConfig::new(x0.clone(), p.steps, p.lsmc_paths, ctx.seed.wrapping_add(1)),
    )?;
    let params = LsmcParams {
        degree: p.lsmc_degree,
        stride: p.lsmc_stride,
        include_start: true,
    };
    let est = lsmc_oracle(&train, &test, model.gain(), &params)?;
    let (reference, source) = if s.n == 1 && ctx.cfg.lattice.is_some() {
        (lattice_values(ctx.cfg, std::slice::from_ref(&x0))?[0], "lattice")
    } else {
        let field = ctx.read_field(FIELD_PSOR)?;
        let v = field
            .value0(&x0)
            .ok_or_else(|| anyhow::anyhow!("start point outside the grid"))?;
        (v, "psor field")
    };
    let gap = (est.value.mean - reference).abs();
    ctx.push(
        CheckOutcome::at_most("lsmc.value", anchor("lsmc"), gap, 3.0 * est.value.stderr, LSMC_TOL)
            .with_detail(format!("regression {} vs {source} {reference}", est.value.mean)),
    );
    ctx.write_csv(
        "lsmc.csv",
        &["value", "stderr", "reference", "source", "dates", "basis", "paths"],
        &[vec![
            format!("{:.10e}", est.value.mean),
            format!("{:.6e}", est.value.stderr),
            format!("{reference:.10e}"),
            source.to_string(),
            est.dates.to_string(),
            est.basis.to_string(),
            p.lsmc_paths.to_string(),
        ]],
    )?;
    Ok(())
}
