//! Friedrichs gradients and the Gauss–Sobolev norms `Lᵖ(μₙ)` and `V^p_n`.
//!
//! `⦀v⦀_{p,n} = ‖v‖_{L^{2p}(μₙ)} + ‖Dv‖_{L^{2p'}(μₙ)}` with `p' = p/(p−1)`.
//! Monte Carlo estimates carry a delta-method standard error for the `1/p`
//! power.

use std::io::Write;

use serde::Serialize;

use super::measure::{GaussianMeasure, Quadrature};
use crate::{Error, Result};

/// Central-difference gradient with the default step `1e-5 · (1 + ‖x‖)`.
pub fn friedrichs_gradient<F>(f: F, x: &[f64]) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    friedrichs_gradient_with_step(f, x, 1e-5 * (1.0 + norm))
}

pub fn friedrichs_gradient_with_step<F>(f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Input(format!("difference step must be positive, got {h}")));
    }
    let mut y = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for k in 0..x.len() {
        y[k] = x[k] + h;
        let fp = f(&y);
        y[k] = x[k] - h;
        let fm = f(&y);
        y[k] = x[k];
        if !(fp.is_finite() && fm.is_finite()) {
            return Err(Error::NonFinite {
                what: "field value",
                coordinate: k,
            });
        }
        out.push((fp - fm) / (2.0 * h));
    }
    Ok(out)
}

/// Norm computation record. For a bare `Lᵖ` norm the gradient fields are
/// `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormReport {
    pub name: String,
    pub p: f64,
    pub method: &'static str,
    pub count: usize,
    pub value_lp: f64,
    pub stderr_lp: f64,
    pub value_grad: Option<f64>,
    pub stderr_grad: Option<f64>,
    pub value_vpn: Option<f64>,
    pub stderr_vpn: Option<f64>,
}

/// `(∫|g|^q dμ)^{1/q}` with delta-method standard error.
fn power_mean<F>(g: F, q: f64, mu: &GaussianMeasure, method: &Quadrature) -> Result<(f64, f64, usize)>
where
    F: Fn(&[f64]) -> f64,
{
    let est = mu.integrate(|x| g(x).abs().powf(q), method)?;
    let value = est.value.max(0.0).powf(1.0 / q);
    let stderr = if est.value > 0.0 {
        est.stderr * value / (q * est.value)
    } else {
        0.0
    };
    Ok((value, stderr, est.count))
}

/// `‖f‖_{Lᵖ(μₙ)}`.
pub fn lp_norm<F>(f: F, p: f64, mu: &GaussianMeasure, method: &Quadrature) -> Result<NormReport>
where
    F: Fn(&[f64]) -> f64,
{
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::Exponent {
            p,
            reason: "p must be a finite real >= 1",
        });
    }
    let (value, stderr, count) = power_mean(f, p, mu, method)?;
    Ok(NormReport {
        name: String::new(),
        p,
        method: method.label(),
        count,
        value_lp: value,
        stderr_lp: stderr,
        value_grad: None,
        stderr_grad: None,
        value_vpn: None,
        stderr_vpn: None,
    })
}

/// `⦀f⦀_{p,n}` from a field and its gradient. `value_lp` holds the
/// `L^{2p}` part and `value_grad` the `L^{2p'}` part of `|Df|`.
pub fn vpn_norm<F, G>(
    f: F,
    grad: G,
    p: f64,
    mu: &GaussianMeasure,
    method: &Quadrature,
) -> Result<NormReport>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64], &mut [f64]),
{
    if p == 1.0 {
        return Err(Error::Exponent {
            p,
            reason: "p = 1 leaves the conjugate exponent undefined",
        });
    }
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Exponent {
            p,
            reason: "p must be a finite real > 1",
        });
    }
    let conj = p / (p - 1.0);
    let n = mu.dim();
    let (lp, lp_se, count) = power_mean(&f, 2.0 * p, mu, method)?;
    let grad_norm = |x: &[f64]| {
        let mut g = vec![0.0; n];
        grad(x, &mut g);
        g.iter().map(|v| v * v).sum::<f64>().sqrt()
    };
    let (gr, gr_se, _) = power_mean(grad_norm, 2.0 * conj, mu, method)?;
    Ok(NormReport {
        name: String::new(),
        p,
        method: method.label(),
        count,
        value_lp: lp,
        stderr_lp: lp_se,
        value_grad: Some(gr),
        stderr_grad: Some(gr_se),
        value_vpn: Some(lp + gr),
        // conservative: the two summands share samples
        stderr_vpn: Some(lp_se + gr_se),
    })
}

impl NormReport {
    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

/// Writes rows `(name, p, method, value, stderr)`; each report contributes a
/// `name:lp` row and, when present, `name:grad` and `name:vpn` rows.
pub fn write_norm_csv<W: Write>(out: W, reports: &[NormReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["name", "p", "method", "value", "stderr"])?;
    for r in reports {
        let mut row = |suffix: &str, v: f64, se: f64| -> Result<()> {
            w.write_record([
                format!("{}:{suffix}", r.name),
                r.p.to_string(),
                r.method.to_string(),
                format!("{v:.12e}"),
                format!("{se:.6e}"),
            ])?;
            Ok(())
        };
        row("lp", r.value_lp, r.stderr_lp)?;
        if let (Some(v), Some(se)) = (r.value_grad, r.stderr_grad) {
            row("grad", v, se)?;
        }
        if let (Some(v), Some(se)) = (r.value_vpn, r.stderr_vpn) {
            row("vpn", v, se)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::CovarianceSpec;

    fn std_normal() -> GaussianMeasure {
        GaussianMeasure::new(&CovarianceSpec::new(vec![1.0]).unwrap(), 1).unwrap()
    }

    #[test]
    fn gradient_of_quadratic() {
        let g = friedrichs_gradient(|x| x[0] * x[0] + x[1] * x[1], &[1.0, 2.0]).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-8 && (g[1] - 4.0).abs() < 1e-8);
        let c = friedrichs_gradient(|_| 3.0, &[1.0, 2.0]).unwrap();
        assert_eq!(c, vec![0.0, 0.0]);
    }

    #[test]
    fn gradient_reports_offending_coordinate() {
        let err = friedrichs_gradient(|x| if x[1] > 0.5 { f64::NAN } else { 0.0 }, &[0.0, 0.5]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { coordinate: 1, .. }));
    }

    #[test]
    fn gaussian_moment_norms() {
        let mu = std_normal();
        let q = Quadrature::TensorHermite { nodes: 64 };
        assert!((lp_norm(|x| x[0], 2.0, &mu, &q).unwrap().value_lp - 1.0).abs() < 1e-12);
        let l4 = lp_norm(|x| x[0], 4.0, &mu, &q).unwrap().value_lp;
        assert!((l4 - 3f64.powf(0.25)).abs() < 1e-12);
        assert!((lp_norm(|_| -2.5, 3.0, &mu, &q).unwrap().value_lp - 2.5).abs() < 1e-12);
    }

    #[test]
    fn vpn_of_identity_and_square() {
        let mu = std_normal();
        let q = Quadrature::TensorHermite { nodes: 64 };
        let r = vpn_norm(|x| x[0], |_, g| g[0] = 1.0, 2.0, &mu, &q).unwrap();
        assert!((r.value_vpn.unwrap() - (3f64.powf(0.25) + 1.0)).abs() < 1e-12);
        let r = vpn_norm(|x| x[0] * x[0], |x, g| g[0] = 2.0 * x[0], 2.0, &mu, &q).unwrap();
        let expect = 105f64.powf(0.25) + 2.0 * 3f64.powf(0.25);
        assert!((r.value_vpn.unwrap() - expect).abs() < 1e-10);
    }

    #[test]
    fn p_one_is_rejected() {
        let mu = std_normal();
        let err = vpn_norm(|x| x[0], |_, g| g[0] = 1.0, 1.0, &mu, &Quadrature::default());
        assert!(matches!(err, Err(Error::Exponent { .. })));
    }

    #[test]
    fn csv_has_expected_rows() {
        let mu = std_normal();
        let q = Quadrature::TensorHermite { nodes: 16 };
        let a = lp_norm(|x| x[0], 2.0, &mu, &q).unwrap().named("x");
        let b = vpn_norm(|x| x[0], |_, g| g[0] = 1.0, 2.0, &mu, &q).unwrap().named("v");
        let mut buf = Vec::new();
        write_norm_csv(&mut buf, &[a, b]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("name,p,method,value,stderr\n"));
    }
}
