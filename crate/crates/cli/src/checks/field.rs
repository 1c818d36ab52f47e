use stoplab_core::vi::{solve_penalized, solve_psor, PenaltyParams, PsorParams};

use super::{anchor, reference_domain, reference_model, solve_section, FIELD_PENALIZED, FIELD_PSOR};
use crate::run::{CheckOutcome, TaskCtx};

/// Largest allowed sup-norm gap between the penalized and PSOR fields.
pub const METHOD_AGREEMENT: f64 = 1e-3;

pub fn run(ctx: &mut TaskCtx<'_>) -> anyhow::Result<()> {
    let s = solve_section(ctx.cfg)?.clone();
    let model = reference_model(ctx.cfg)?;
    let dom = reference_domain(ctx.cfg)?;
    let pen = solve_penalized(&model, &dom, &PenaltyParams::new(s.epsilon, s.time_steps))?;
    let mut params = PsorParams::new(s.time_steps);
    params.omega = s.omega;
    let psor = solve_psor(&model, &dom, &params)?;
    for (name, field) in [(FIELD_PENALIZED, &pen), (FIELD_PSOR, &psor)] {
        let mut bytes = Vec::new();
        field.write_binary(&mut bytes)?;
        ctx.write(name, &bytes)?;
    }
    let stride = (s.time_steps / 8).max(1);
    for (name, field) in [("probes_penalized.csv", &pen), ("probes_psor.csv", &psor)] {
        let mut bytes = Vec::new();
        field.write_probe_csv(&mut bytes, &s.probes, stride)?;
        ctx.write(name, &bytes)?;
    }
    let gap = pen
        .u()
        .iter()
        .zip(psor.u())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    ctx.push(CheckOutcome::at_most("field.method_agreement", anchor("field"), gap, METHOD_AGREEMENT, 0.0));
    Ok(())
}
