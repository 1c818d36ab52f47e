//! The symmetric Ornstein-Uhlenbeck instance: invariant law, the
//! Dirichlet form and a uniqueness surrogate.

use stoplab_core::ou::{
    dual_pairing_check, empirical_invariant_check, invariant_covariance, symmetric_form, uniqueness_surrogate,
    InvariantCheckConfig, InvariantReport, InvariantStart, SeparableGain,
};
use stoplab_core::problem::{PolyField, Quadrature};
use stoplab_core::sde::FiniteModel;
use stoplab_core::vi::DomainSpec;

use super::anchor;
use crate::run::{CheckOutcome, TaskCtx};

/// Width of the acceptance band of the variance estimates, in standard errors.
pub const VARIANCE_SDS: f64 = 3.0;
/// Tolerance of the form identities evaluated by quadrature.
pub const FORM_TOL: f64 = 1e-9;
/// Largest allowed distance between penalized and PSOR solutions.
pub const UNIQUENESS_TOL: f64 = 1e-3;

fn report_rows(start: &str, r: &InvariantReport) -> Vec<Vec<String>> {
    r.rows
        .iter()
        .map(|row| {
            vec![
                start.to_string(),
                row.coordinate.to_string(),
                format!("{:.10e}", row.gamma_theory),
                format!("{:.10e}", row.gamma_empirical),
                format!("{:.6e}", row.stderr),
                row.horizon.to_string(),
                row.paths.to_string(),
            ]
        })
        .collect()
}

pub fn invariant(ctx: &mut TaskCtx<'_>) -> anyhow::Result<()> {
    let sec = ctx
        .cfg
        .invariant
        .clone()
        .ok_or_else(|| anyhow::anyhow!("configuration has no [invariant] section"))?;
    let problem = ctx.cfg.problem.clone();
    let (op, cov) = (&problem.operator, &problem.covariance);
    let inv = invariant_covariance(op, cov, sec.n)?;
    let a = anchor("invariant");

    let mut rows = Vec::new();
    let mut checkpoint_rows = Vec::new();
    for (label, start, salt) in [("origin", InvariantStart::Origin, 0u64), ("stationary", InvariantStart::Stationary, 1)] {
        let cfg = InvariantCheckConfig {
            horizon: inv.relaxation_horizon(),
            steps: sec.steps,
            paths: sec.paths,
            seed: ctx.seed.wrapping_add(salt),
            start,
            checkpoints: sec.checkpoints,
        };
        let report = empirical_invariant_check(op, cov, sec.n, &cfg)?;
        for r in &report.rows {
            ctx.push(CheckOutcome::at_most(
                &format!("invariant.variance.{label}.x{}", r.coordinate),
                a,
                (r.gamma_empirical - r.gamma_theory).abs(),
                VARIANCE_SDS * r.stderr,
                0.0,
            ));
        }
        for c in &report.cross {
            ctx.push(CheckOutcome::at_most(
                &format!("invariant.cross.{label}.x{}x{}", c.i, c.j),
                a,
                c.covariance.abs(),
                VARIANCE_SDS * c.stderr,
                0.0,
            ));
        }
        rows.extend(report_rows(label, &report));
        for (t, ests) in &report.checkpoints {
            for (i, e) in ests.iter().enumerate() {
                checkpoint_rows.push(vec![
                    label.to_string(),
                    format!("{t:.6}"),
                    (i + 1).to_string(),
                    format!("{:.10e}", e.mean),
                    format!("{:.6e}", e.stderr),
                ]);
            }
        }
    }
    ctx.write_csv(
        "invariant.csv",
        &["start", "coordinate", "gamma_theory", "gamma_empirical", "stderr", "horizon", "paths"],
        &rows,
    )?;
    ctx.write_csv(
        "invariant_checkpoints.csv",
        &["start", "t", "coordinate", "variance", "stderr"],
        &checkpoint_rows,
    )?;

    // Dirichlet form on random polynomial pairs
    let q = Quadrature::TensorHermite {
        nodes: sec.quadrature_nodes,
    };
    let mut asym: f64 = 0.0;
    let mut neg: f64 = 0.0;
    let mut green: f64 = 0.0;
    let mut form_rows = Vec::new();
    for j in 0..sec.random_fields as u64 {
        let u = PolyField::random(sec.n, 3, ctx.seed.wrapping_add(2 * j));
        let w = PolyField::random(sec.n, 2, ctx.seed.wrapping_add(2 * j + 1));
        let uw = symmetric_form(&u, &w, &inv, &q)?.value;
        let wu = symmetric_form(&w, &u, &inv, &q)?.value;
        let uu = symmetric_form(&u, &u, &inv, &q)?.value;
        let th = SeparableGain { rate: 0.5, spatial: &u };
        let pairing = dual_pairing_check(op, cov, &inv, &th, &w, 0.5 * problem.horizon(), &q)?;
        let scale = uw.abs().max(1.0);
        asym = asym.max((uw - wu).abs() / scale);
        neg = neg.max(-uu / uu.abs().max(1.0));
        green = green.max(pairing.gap() / pairing.direct.abs().max(1.0));
        form_rows.push(vec![
            j.to_string(),
            format!("{uw:.15e}"),
            format!("{wu:.15e}"),
            format!("{uu:.15e}"),
            format!("{:.15e}", pairing.direct),
            format!("{:.15e}", pairing.green),
        ]);
    }
    ctx.write_csv(
        "dirichlet_form.csv",
        &["pair", "a_uw", "a_wu", "a_uu", "pairing_direct", "pairing_green"],
        &form_rows,
    )?;
    ctx.push(CheckOutcome::at_most("invariant.form_symmetry", a, asym, 0.0, FORM_TOL));
    ctx.push(CheckOutcome::at_most("invariant.form_nonnegative", a, neg, 0.0, FORM_TOL));
    ctx.push(CheckOutcome::at_most("invariant.green_formula", a, green, 0.0, FORM_TOL));

    let model = FiniteModel::ou(op, cov, sec.n, problem.gain.clone())?;
    let dom = DomainSpec::with_spacing(sec.uniqueness_radius, &sec.uniqueness_spacing)?;
    let dist = uniqueness_surrogate(&model, &dom, &inv, sec.uniqueness_epsilon, sec.uniqueness_steps)?;
    ctx.push(
        CheckOutcome::at_most("invariant.uniqueness", a, dist, UNIQUENESS_TOL, 0.0)
            .with_detail("L2(nu) distance of penalized and PSOR solutions"),
    );
    Ok(())
}
