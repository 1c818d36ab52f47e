//! Parameter sweeps: penalty and domain convergence, the uniform norm
//! audit, the approximation ladder and the trace diagnostics.

use stoplab_core::operators::{trace_diagnostics, write_trace_csv, TAIL_FLAG};
use stoplab_core::problem::GaussianMeasure;
use stoplab_core::sde::{galerkin_convergence_study, yosida_convergence_study, ConvergenceReport, FiniteModel};
use stoplab_core::stats::relative_trend;
use stoplab_core::vi::{domain_sweep, norm_audit as audit_field, penalty_sweep, solve_with, DomainSpec, NormAudit, SolverChoice, NUM_TOL};

use super::{anchor, fmt, fmt_point, measure, reference_domain, reference_model, solve_section};
use crate::config::{LadderSection, SweepSection};
use crate::run::{CheckOutcome, TaskCtx};

/// Required contraction of successive domain differences.
pub const DOMAIN_RATIO: f64 = 0.25;
/// Largest allowed relative trend of a norm across one sweep.
pub const TREND_TOL: f64 = 0.05;

fn sweep_section(ctx: &TaskCtx<'_>) -> anyhow::Result<SweepSection> {
    ctx.cfg
        .sweeps
        .clone()
        .ok_or_else(|| anyhow::anyhow!("configuration has no [sweeps] section"))
}

pub fn penalty(ctx: &mut TaskCtx<'_>) -> anyhow::Result<()> {
    let w = sweep_section(ctx)?;
    let s = solve_section(ctx.cfg)?.clone();
    let model = reference_model(ctx.cfg)?;
    let dom = reference_domain(ctx.cfg)?;
    let mu = measure(ctx.cfg, s.n)?;
    let sweep = penalty_sweep(&model, &dom, &w.penalties, s.time_steps, &mu)?;
    let a = anchor("penalty");
    let rows: Vec<Vec<String>> = sweep
        .rows
        .iter()
        .map(|r| {
            vec![
                format!("{:e}", r.epsilon),
                format!("{:.10e}", r.negative_part),
                format!("{:.10e}", r.negative_sup),
                format!("{:.10e}", r.distance_psor),
                format!("{:.10e}", r.distance_sup),
            ]
        })
        .collect();
    ctx.write_csv(
        "penalty_sweep.csv",
        &["epsilon", "negative_part", "negative_sup", "distance_psor", "distance_sup"],
        &rows,
    )?;
    let last = sweep.rows.last().expect("at least three levels");
    ctx.push(
        CheckOutcome::new(
            "penalty.negative_part_decreasing",
            a,
            sweep.negative_part_decreasing(),
            last.negative_part,
            sweep.rows[0].negative_part,
            0.0,
        )
        .with_detail("strictly decreasing in epsilon"),
    );
    ctx.push(
        CheckOutcome::new(
            "penalty.distance_decreasing",
            a,
            sweep.distance_decreasing(),
            last.distance_psor,
            sweep.rows[0].distance_psor,
            0.0,
        )
        .with_detail("strictly decreasing in epsilon"),
    );
    Ok(())
}

pub fn domain(ctx: &mut TaskCtx<'_>) -> anyhow::Result<()> {
    let w = sweep_section(ctx)?;
    let s = solve_section(ctx.cfg)?.clone();
    let model = reference_model(ctx.cfg)?;
    let sweep = domain_sweep(
        &model,
        &w.radii,
        &s.spacing,
        &s.probes,
        s.time_steps,
        SolverChoice::Psor { omega: s.omega },
    )?;
    let mut rows = Vec::new();
    for (r, vals) in sweep.radii.iter().zip(&sweep.values) {
        for (p, v) in sweep.probes.iter().zip(vals) {
            rows.push(vec![fmt(*r), fmt_point(p), format!("{v:.12e}")]);
        }
    }
    ctx.write_csv("domain_sweep.csv", &["radius", "x", "value"], &rows)?;
    // excess of each later difference over the allowed fraction of the
    // earlier one, worst case over probes and radius triples
    let diffs = sweep.differences();
    let excess = diffs
        .windows(2)
        .flat_map(|d| d[0].iter().zip(&d[1]).map(|(d0, d1)| d1 - DOMAIN_RATIO * d0).collect::<Vec<_>>())
        .fold(f64::NEG_INFINITY, f64::max);
    ctx.push(
        CheckOutcome::new(
            "domain.stabilizes",
            anchor("domain"),
            sweep.stabilizes(DOMAIN_RATIO, NUM_TOL),
            excess,
            0.0,
            NUM_TOL,
        )
        .with_detail(format!(
            "|U(R3)-U(R2)| <= {DOMAIN_RATIO}|U(R2)-U(R1)| over radii {:?}",
            sweep.radii
        )),
    );
    Ok(())
}

/// One audited solve of a one-factor sweep.
struct AuditPoint {
    factor: &'static str,
    param: f64,
    audit: NormAudit,
}

fn audit_at(model: &FiniteModel, dom: &DomainSpec, epsilon: f64, steps: usize, mu: &GaussianMeasure, ps: &[f64]) -> anyhow::Result<NormAudit> {
    let field = solve_with(model, dom, SolverChoice::Penalized { epsilon }, steps)?;
    Ok(audit_field(&field, model.gain(), mu, ps)?)
}

pub fn norm_audit(ctx: &mut TaskCtx<'_>) -> anyhow::Result<()> {
    let w = sweep_section(ctx)?;
    let au = w.audit.clone();
    let s = solve_section(ctx.cfg)?.clone();
    let problem = &ctx.cfg.problem;
    let model = reference_model(ctx.cfg)?;
    let mu = measure(ctx.cfg, s.n)?;
    let ps = &au.exponents;
    let mut points = Vec::new();
    for &r in &au.radii {
        let dom = DomainSpec::with_spacing(r, &s.spacing)?;
        let audit = audit_at(&model, &dom, s.epsilon, s.time_steps, &mu, ps)?;
        points.push(AuditPoint { factor: "radius", param: r, audit });
    }
    let dom = reference_domain(ctx.cfg)?;
    for &eps in &au.penalties {
        let audit = audit_at(&model, &dom, eps, s.time_steps, &mu, ps)?;
        points.push(AuditPoint { factor: "epsilon", param: eps, audit });
    }
    for &alpha in &au.alphas {
        let m = FiniteModel::from_problem(problem, Some(alpha), s.n)?;
        let audit = audit_at(&m, &dom, s.epsilon, s.time_steps, &mu, ps)?;
        points.push(AuditPoint { factor: "alpha", param: alpha, audit });
    }
    for &n in &au.ns {
        let m = FiniteModel::from_problem(problem, s.alpha, n)?;
        let d = DomainSpec::with_spacing(au.n_radius, &au.n_spacing[..n])?;
        let mu_n = measure(ctx.cfg, n)?;
        let audit = audit_at(&m, &d, s.epsilon, au.n_time_steps, &mu_n, ps)?;
        points.push(AuditPoint { factor: "n", param: n as f64, audit });
    }

    let mut rows = Vec::new();
    for pt in &points {
        for r in &pt.audit.rows {
            rows.push(vec![
                pt.factor.to_string(),
                fmt(pt.param),
                fmt(r.p),
                format!("{:.10e}", r.u_norm),
                format!("{:.10e}", r.u_bound),
                format!("{:.10e}", r.grad_norm),
                format!("{:.10e}", pt.audit.dt_norm),
            ]);
        }
    }
    ctx.write_csv(
        "norm_audit.csv",
        &["factor", "param", "p", "u_norm", "u_bound", "grad_norm", "dt_norm"],
        &rows,
    )?;

    let a = anchor("norm_audit");
    let worst_ratio = points
        .iter()
        .flat_map(|pt| pt.audit.rows.iter().map(|r| r.u_norm / r.u_bound))
        .fold(0.0f64, f64::max);
    ctx.push(
        CheckOutcome::at_most("norm_audit.u_bound", a, worst_ratio, 1.0, 0.0)
            .with_detail("largest ratio ||u||_p / (2 sup|Theta| T^(1/p))"),
    );
    let mut trend_rows = Vec::new();
    for factor in ["radius", "epsilon", "alpha", "n"] {
        let sel: Vec<&AuditPoint> = points.iter().filter(|p| p.factor == factor).collect();
        if sel.len() < 2 {
            continue;
        }
        // penalty and Yosida levels span decades
        let params: Vec<f64> = sel
            .iter()
            .map(|p| if matches!(factor, "epsilon" | "alpha") { p.param.log10() } else { p.param })
            .collect();
        let mut series: Vec<(String, Vec<f64>)> = ps
            .iter()
            .enumerate()
            .map(|(j, q)| (format!("grad_p{q}"), sel.iter().map(|p| p.audit.rows[j].grad_norm).collect()))
            .collect();
        series.push(("dt".into(), sel.iter().map(|p| p.audit.dt_norm).collect()));
        for (name, values) in series {
            let trend = relative_trend(&params, &values);
            trend_rows.push(vec![factor.to_string(), name.clone(), format!("{trend:.6e}")]);
            ctx.push(CheckOutcome::at_most(
                &format!("norm_audit.trend.{factor}.{name}"),
                a,
                trend.abs(),
                TREND_TOL,
                0.0,
            ));
        }
    }
    ctx.write_csv("norm_trends.csv", &["factor", "norm", "relative_trend"], &trend_rows)?;
    Ok(())
}

fn ladder_section(ctx: &TaskCtx<'_>) -> anyhow::Result<LadderSection> {
    ctx.cfg
        .ladder
        .clone()
        .ok_or_else(|| anyhow::anyhow!("configuration has no [ladder] section"))
}

fn push_study(ctx: &mut TaskCtx<'_>, name: &str, report: &ConvergenceReport) -> anyhow::Result<()> {
    let mut bytes = Vec::new();
    report.write_csv(&mut bytes)?;
    ctx.write(&format!("{name}_convergence.csv"), &bytes)?;
    let errors = report.errors();
    ctx.push(
        CheckOutcome::new(
            &format!("ladder.{name}_decreasing"),
            anchor("ladder"),
            report.strictly_decreasing(),
            *errors.last().unwrap_or(&f64::NAN),
            *errors.first().unwrap_or(&f64::NAN),
            0.0,
        )
        .with_detail(format!("errors {errors:?}")),
    );
    Ok(())
}

pub fn ladder(ctx: &mut TaskCtx<'_>) -> anyhow::Result<()> {
    let l = ladder_section(ctx)?;
    let problem = ctx.cfg.problem.clone();
    if !l.alphas.is_empty() {
        let r = yosida_convergence_study(&problem, &l.alphas, l.alpha_n, l.paths, l.steps, ctx.seed)?;
        push_study(ctx, "yosida", &r)?;
    }
    if !l.ns.is_empty() {
        let r = galerkin_convergence_study(&problem, &l.ns, l.galerkin_alpha, l.paths, l.steps, ctx.seed)?;
        push_study(ctx, "galerkin", &r)?;
    }
    Ok(())
}

pub fn trace(ctx: &mut TaskCtx<'_>) -> anyhow::Result<()> {
    let p = &ctx.cfg.problem;
    let report = trace_diagnostics(&p.operator, &p.covariance)?;
    let mut bytes = Vec::new();
    write_trace_csv(&mut bytes, &report)?;
    ctx.write("trace.csv", &bytes)?;
    let last = report.rows.last().expect("nonempty truncation");
    let flagged = report.rows.iter().filter(|r| r.flag).count();
    ctx.push(
        CheckOutcome::new(
            "trace.summable",
            anchor("trace"),
            !report.divergent && !last.flag,
            report.decay_exponent.unwrap_or(f64::NAN),
            stoplab_core::operators::DECAY_FLAG,
            0.0,
        )
        .with_detail(format!(
            "decay exponent must exceed the bound; Tr[AQA*] partial sum {} at level {}, tail ratio {} (flag above {TAIL_FLAG}), {flagged} flagged levels",
            last.tr_aqa, last.level, last.tail_ratio
        )),
    );
    Ok(())
}
