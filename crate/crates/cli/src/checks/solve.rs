//! Checks on the solved fields: agreement with an independent oracle,
//! complementarity, and the a priori bounds on the value.

use stoplab_core::sde::lipschitz_surrogate;
use stoplab_core::stopping::{lattice_oracle_1d, LatticeParams};
use stoplab_core::vi::{complementarity_residual, ValueField, NUM_TOL};

use super::{anchor, fmt, fmt_point, reference_model, solve_section, FIELD_PENALIZED, FIELD_PSOR};
use crate::config::ExperimentConfig;
use crate::run::{CheckOutcome, TaskCtx};

/// Largest allowed spread of the three value estimates at a probe.
pub const PROBE_AGREEMENT: f64 = 5e-3;
/// Largest allowed complementarity residual of the PSOR field.
pub const COMPLEMENTARITY_TOL: f64 = 1e-6;
/// Relative slack on the Lipschitz bound of the value.
pub const LIPSCHITZ_SLACK: f64 = 1.1;

/// `U(0, x)` of the one-dimensional lattice oracle at each probe.
pub(crate) fn lattice_values(cfg: &ExperimentConfig, probes: &[Vec<f64>]) -> anyhow::Result<Vec<f64>> {
    let lat = cfg
        .lattice
        .as_ref()
        .ok_or_else(|| anyhow::anyhow!("configuration has no [lattice] section"))?;
    let model = reference_model(cfg)?;
    let params = LatticeParams::from_model(&model, 0.0, lat.half_width, lat.spacing, lat.steps)?;
    let value = lattice_oracle_1d(&params, model.gain())?;
    let h = lat.spacing;
    Ok(probes
        .iter()
        .map(|p| {
            let s = ((p[0] - value.xs[0]) / h).clamp(0.0, (value.xs.len() - 1) as f64);
            let i = (s.floor() as usize).min(value.xs.len() - 2);
            let w = s - i as f64;
            (1.0 - w) * value.v0[i] + w * value.v0[i + 1]
        })
        .collect())
}

fn value_at_probe(field: &ValueField, p: &[f64]) -> anyhow::Result<f64> {
    field
        .value0(p)
        .ok_or_else(|| anyhow::anyhow!("probe {p:?} lies outside the grid"))
}

pub fn obstacle(ctx: &mut TaskCtx<'_>) -> anyhow::Result<()> {
    let s = solve_section(ctx.cfg)?.clone();
    let model = reference_model(ctx.cfg)?;
    let pen = ctx.read_field(FIELD_PENALIZED)?;
    let psor = ctx.read_field(FIELD_PSOR)?;
    let lattice = if s.n == 1 {
        Some(lattice_values(ctx.cfg, &s.probes)?)
    } else {
        None
    };
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for (j, p) in s.probes.iter().enumerate() {
        let a = value_at_probe(&pen, p)?;
        let b = value_at_probe(&psor, p)?;
        let mut vals = vec![a, b];
        if let Some(l) = &lattice {
            vals.push(l[j]);
        }
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        worst = worst.max(hi - lo);
        rows.push(vec![
            fmt_point(p),
            fmt(a),
            fmt(b),
            lattice.as_ref().map_or(String::new(), |l| fmt(l[j])),
            fmt(hi - lo),
        ]);
    }
    ctx.write_csv(
        "obstacle_probes.csv",
        &["x", "penalized", "psor", "lattice", "spread"],
        &rows,
    )?;
    let oracle = if lattice.is_some() { "penalized, PSOR and lattice" } else { "penalized and PSOR" };
    ctx.push(
        CheckOutcome::at_most("obstacle.probe_agreement", anchor("obstacle"), worst, PROBE_AGREEMENT, 0.0)
            .with_detail(format!("{oracle} values at {} probes", s.probes.len())),
    );

    let mut res_rows = Vec::new();
    for (label, field) in [("penalized", &pen), ("psor", &psor)] {
        let r = complementarity_residual(field, &model)?;
        res_rows.push(vec![
            label.to_string(),
            format!("{:.6e}", r.sup),
            r.argmax.0.to_string(),
            r.argmax.1.to_string(),
            format!("{:.6e}", r.l2_mu),
        ]);
        if label == "psor" {
            let mut x = vec![0.0; field.domain().dim()];
            field.domain().node(r.argmax.1, &mut x);
            ctx.push(
                CheckOutcome::at_most(
                    "obstacle.complementarity",
                    anchor("obstacle"),
                    r.sup,
                    COMPLEMENTARITY_TOL,
                    0.0,
                )
                .with_detail(format!(
                    "largest residual at t = {}, x = ({})",
                    field.time(r.argmax.0),
                    fmt_point(&x)
                )),
            );
        }
    }
    ctx.write_csv("residuals.csv", &["field", "sup", "level", "node", "l2_mu"], &res_rows)?;
    Ok(())
}

/// Largest difference quotient of `U(0, ·)` between neighbouring nodes
/// along each axis, both inside the ball of half the domain radius. The
/// arrested field has a boundary layer at `∂O_R`, so only the inner
/// compact is compared with the Lipschitz bound of the unarrested value.
fn max_slope(field: &ValueField) -> f64 {
    let dom = field.domain();
    let n = dom.dim();
    let big = field.big_u_level(0);
    let inner = 0.5 * dom.radius();
    let inside = |flat: usize, x: &mut [f64]| {
        dom.node(flat, x);
        x.iter().map(|v| v * v).sum::<f64>().sqrt() <= inner
    };
    let mut idx = vec![0; n];
    let mut x = vec![0.0; n];
    let mut worst: f64 = 0.0;
    for flat in 0..dom.len() {
        if !inside(flat, &mut x) {
            continue;
        }
        dom.multi_index(flat, &mut idx);
        for axis in 0..n {
            if idx[axis] + 1 >= dom.counts()[axis] {
                continue;
            }
            let next = flat + dom.stride(axis);
            if !inside(next, &mut x) {
                continue;
            }
            worst = worst.max((big[next] - big[flat]).abs() / dom.spacing(axis));
        }
    }
    worst
}

pub fn value_bounds(ctx: &mut TaskCtx<'_>) -> anyhow::Result<()> {
    let s = solve_section(ctx.cfg)?.clone();
    let paths = ctx
        .cfg
        .paths
        .clone()
        .ok_or_else(|| anyhow::anyhow!("configuration has no [paths] section"))?;
    let model = reference_model(ctx.cfg)?;
    let field = ctx.read_field(FIELD_PSOR)?;
    let bounds = model.gain().bounds();
    let a = anchor("value_bounds");

    let lo = field.big_u().iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = field.big_u().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    ctx.push(CheckOutcome::new("value_bounds.nonnegative", a, lo >= -NUM_TOL, lo, 0.0, NUM_TOL));
    ctx.push(CheckOutcome::at_most("value_bounds.upper", a, hi, bounds.theta_max, NUM_TOL));
    let u_min = field.u().iter().cloned().fold(f64::INFINITY, f64::min);
    ctx.push(CheckOutcome::new("value_bounds.above_gain", a, u_min >= -NUM_TOL, u_min, 0.0, NUM_TOL));

    let terminal = field.u_level(field.steps()).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    ctx.push(CheckOutcome::at_most("value_bounds.terminal", a, terminal, 0.0, 1e-12));
    let dom = field.domain();
    let mut boundary: f64 = 0.0;
    for k in 0..=field.steps() {
        let u = field.u_level(k);
        for flat in (0..dom.len()).filter(|&f| !dom.is_interior(f)) {
            boundary = boundary.max(u[flat].abs());
        }
    }
    ctx.push(CheckOutcome::at_most("value_bounds.boundary", a, boundary, 0.0, 1e-12));

    // Flow Lipschitz constant from coupled pairs around the probes.
    let h = s.spacing[0];
    let mut c_hat: f64 = 0.0;
    let mut rows = Vec::new();
    for p in &s.probes {
        let mut q = p.clone();
        q[0] += h;
        let est = lipschitz_surrogate(&model, p, &q, paths.steps, paths.lipschitz_paths, ctx.seed)?;
        c_hat = c_hat.max(est.mean + 3.0 * est.stderr);
        rows.push(vec![fmt_point(p), fmt(est.mean), fmt(est.stderr)]);
    }
    ctx.write_csv("lipschitz_surrogate.csv", &["x", "mean", "stderr"], &rows)?;
    let slope = max_slope(&field);
    let bound = c_hat * bounds.lip_x * LIPSCHITZ_SLACK;
    ctx.push(
        CheckOutcome::at_most("value_bounds.lipschitz", a, slope, bound, 0.0)
            .with_detail(format!("C_hat = {c_hat}, L_theta = {}", bounds.lip_x)),
    );
    Ok(())
}
