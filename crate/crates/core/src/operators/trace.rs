use std::io::Write;

use serde::Serialize;

use crate::problem::{CovarianceSpec, OperatorSpec};
use crate::stats::linear_fit;
use crate::{Error, Result};

/// Tail ratio above which a truncation level is flagged.
pub const TAIL_FLAG: f64 = 0.25;
/// Fitted decay exponent of the `Tr[AQA*]` increments at or below which the
/// series is flagged as divergent.
pub const DECAY_FLAG: f64 = 1.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub level: usize,
    pub tr_q: f64,
    pub tr_aqa: f64,
    /// `(S_k − S_⌈k/2⌉) / S_k` for the `Tr[AQA*]` partial sums.
    pub tail_ratio: f64,
    pub flag: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceReport {
    pub rows: Vec<TraceRow>,
    /// Least-squares exponent `q` in `increment_k ≈ c·k^{-q}` over the upper
    /// half of the levels; `None` when too few nonzero increments exist.
    pub decay_exponent: Option<f64>,
    pub divergent: bool,
}

/// Partial sums of `Tr Q` and `Tr[A Q A*] = Σ_{i,j≤k} a_ij² λ_j` at every
/// truncation level `k`.
pub fn trace_diagnostics(op: &OperatorSpec, cov: &CovarianceSpec) -> Result<TraceReport> {
    let n = cov.n_master();
    if op.dim() != n {
        return Err(Error::Length {
            what: "operator (must match covariance truncation)",
            expected: n,
            got: op.dim(),
        });
    }
    let lam = cov.lambdas();
    let mut rows = Vec::with_capacity(n);
    let mut sums = Vec::with_capacity(n);
    let mut tr_q = 0.0;
    let mut tr_aqa = 0.0;
    for k in 0..n {
        tr_q += lam[k];
        // new row k and new column k of the leading block
        let mut inc = 0.0;
        for j in 0..=k {
            inc += op.entry(k, j).powi(2) * lam[j];
        }
        for i in 0..k {
            inc += op.entry(i, k).powi(2) * lam[k];
        }
        tr_aqa += inc;
        sums.push(tr_aqa);
        let level = k + 1;
        let half = level.div_ceil(2);
        let tail_ratio = if tr_aqa > 0.0 {
            (tr_aqa - sums[half - 1]) / tr_aqa
        } else {
            0.0
        };
        rows.push(TraceRow {
            level,
            tr_q,
            tr_aqa,
            tail_ratio,
            flag: level >= 4 && tail_ratio > TAIL_FLAG,
        });
    }
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    for k in (n / 2).max(1)..=n {
        let prev = if k >= 2 { sums[k - 2] } else { 0.0 };
        let inc = sums[k - 1] - prev;
        if inc > 0.0 {
            lx.push((k as f64).ln());
            ly.push(inc.ln());
        }
    }
    let decay_exponent = if lx.len() >= 3 {
        Some(-linear_fit(&lx, &ly).0)
    } else {
        None
    };
    let divergent = decay_exponent.is_some_and(|q| q <= DECAY_FLAG);
    Ok(TraceReport {
        rows,
        decay_exponent,
        divergent,
    })
}

/// Columns `(level, trQ_partial, trAQA_partial, tail_ratio, assumption_flag)`.
pub fn write_trace_csv<W: Write>(out: W, report: &TraceReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["level", "trQ_partial", "trAQA_partial", "tail_ratio", "assumption_flag"])?;
    for r in &report.rows {
        w.write_record([
            r.level.to_string(),
            format!("{:.15e}", r.tr_q),
            format!("{:.15e}", r.tr_aqa),
            format!("{:.6e}", r.tail_ratio),
            (r.flag || report.divergent).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
