use std::io::Write;

use serde::Serialize;

use crate::problem::GainSpec;
use crate::sde::Rung;
use crate::vi::{ValueField, NUM_TOL};
use crate::{Error, Result};

/// Default contact tolerance: ten times the solver's inequality tolerance.
pub const DELTA_CONTACT: f64 = 10.0 * NUM_TOL;

/// The hitting rule `τ* = inf{s ≥ t : U(s, X_s) − Θ(s, X_s) ≤ δ} ∧ T`,
/// evaluated on the field's time levels with multilinear interpolation of
/// the gap `u = U − Θ` in space.
#[derive(Debug, Clone)]
pub struct StoppingRule {
    field: ValueField,
    gain: GainSpec,
    delta: f64,
    mask: Vec<bool>,
}

/// Contact set of one time level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContactSlice {
    pub t: f64,
    /// Number of interior nodes in contact.
    pub nodes: usize,
    /// Volume of the contact set, `nodes · Πh`.
    pub area: f64,
}

/// In one dimension, the maximal intervals of interior contact nodes at
/// one time level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreeBoundaryRow {
    pub t: f64,
    pub intervals: Vec<(f64, f64)>,
}

pub fn contact_region(field: &ValueField, gain: &GainSpec, delta: f64) -> Result<StoppingRule> {
    if !(delta > NUM_TOL) {
        return Err(Error::Input(format!(
            "contact tolerance {delta} must exceed the solver tolerance {NUM_TOL}"
        )));
    }
    let nodes = field.domain().len();
    let mask: Vec<bool> = field.u().iter().map(|&u| u <= delta).collect();
    let terminal = &mask[field.steps() * nodes..];
    if !terminal.iter().all(|&m| m) {
        let bad = terminal.iter().position(|&m| !m).unwrap_or(0);
        return Err(Error::Consistency(format!(
            "terminal slice not in contact at node {bad}: u(T) = {}",
            field.u_level(field.steps())[bad]
        )));
    }
    Ok(StoppingRule {
        field: field.clone(),
        gain: gain.clone(),
        delta,
        mask,
    })
}

impl StoppingRule {
    pub fn field(&self) -> &ValueField {
        &self.field
    }

    pub fn gain(&self) -> &GainSpec {
        &self.gain
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn rung(&self) -> Rung {
        self.field.meta().rung
    }

    /// Nodewise contact flags, `(M+1) × nodes`.
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Interpolated gap `u(t_k, x)`.
    pub fn gap(&self, k: usize, x: &[f64]) -> f64 {
        self.field.u_level_at(k, x)
    }

    pub fn in_contact(&self, k: usize, x: &[f64]) -> bool {
        k == self.field.steps() || self.gap(k, x) <= self.delta
    }

    pub fn contact_slices(&self) -> Vec<ContactSlice> {
        let dom = self.field.domain();
        let nodes = dom.len();
        let cell: f64 = (0..dom.dim()).map(|a| dom.spacing(a)).product();
        let interior: Vec<usize> = (0..nodes).filter(|&i| dom.is_interior(i)).collect();
        (0..=self.field.steps())
            .map(|k| {
                let count = interior.iter().filter(|&&i| self.mask[k * nodes + i]).count();
                ContactSlice {
                    t: self.field.time(k),
                    nodes: count,
                    area: count as f64 * cell,
                }
            })
            .collect()
    }

    /// Contact intervals per time level (one-dimensional fields only).
    pub fn free_boundary(&self) -> Result<Vec<FreeBoundaryRow>> {
        let dom = self.field.domain();
        if dom.dim() != 1 {
            return Err(Error::Input("free boundary curves need a one-dimensional field".into()));
        }
        let nodes = dom.len();
        let rows = (0..=self.field.steps())
            .map(|k| {
                let mut intervals = Vec::new();
                let mut open: Option<(f64, f64)> = None;
                for i in 0..nodes {
                    let x = dom.coord(0, i);
                    let hit = dom.is_interior(i) && self.mask[k * nodes + i];
                    open = match (open, hit) {
                        (None, true) => Some((x, x)),
                        (Some((lo, _)), true) => Some((lo, x)),
                        (Some(iv), false) => {
                            intervals.push(iv);
                            None
                        }
                        (None, false) => None,
                    };
                }
                intervals.extend(open);
                FreeBoundaryRow {
                    t: self.field.time(k),
                    intervals,
                }
            })
            .collect();
        Ok(rows)
    }

    /// Upper end of the contact interval that contains `anchor` at each
    /// time level, `None` when `anchor` is not in contact.
    pub fn boundary_through(&self, anchor: f64) -> Result<Vec<(f64, Option<f64>)>> {
        Ok(self
            .free_boundary()?
            .into_iter()
            .map(|row| {
                let b = row
                    .intervals
                    .iter()
                    .find(|(lo, hi)| *lo <= anchor && anchor <= *hi)
                    .map(|iv| iv.1);
                (row.t, b)
            })
            .collect())
    }
}

/// CSV with columns `t, interval, lower, upper`.
pub fn write_free_boundary_csv<W: Write>(out: W, rows: &[FreeBoundaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "interval", "lower", "upper"])?;
    for row in rows {
        for (j, (lo, hi)) in row.intervals.iter().enumerate() {
            w.write_record([row.t.to_string(), j.to_string(), lo.to_string(), hi.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
