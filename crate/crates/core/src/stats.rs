//! Small statistics helpers shared by the Monte Carlo estimators.

/// Pairwise (cascade) summation. The association order depends only on the
/// slice length, so results are reproducible regardless of how the values
/// were produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Sample mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

impl MeanEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let count = xs.len();
        if count == 0 {
            return Self {
                mean: f64::NAN,
                stderr: f64::NAN,
                count,
            };
        }
        if xs.iter().all(|&x| x == xs[0]) {
            // exact for degenerate samples (e.g. every path stopped at once)
            return Self {
                mean: xs[0],
                stderr: 0.0,
                count,
            };
        }
        let mean = pairwise_sum(xs) / count as f64;
        if count == 1 {
            return Self {
                mean,
                stderr: 0.0,
                count,
            };
        }
        let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = pairwise_sum(&sq) / (count - 1) as f64;
        Self {
            mean,
            stderr: (var / count as f64).sqrt(),
            count,
        }
    }
}

/// Ordinary least squares slope and intercept of `ys` on `xs`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return (0.0, my);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Fitted change across the whole tested parameter range, relative to the
/// mean response. Parameters are rescaled to `[0, 1]` before fitting, so the
/// value is the regression slope per unit of normalized parameter divided by
/// the mean.
pub fn relative_trend(params: &[f64], values: &[f64]) -> f64 {
    let lo = params.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = params.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let xs: Vec<f64> = params
        .iter()
        .map(|p| if span > 0.0 { (p - lo) / span } else { 0.0 })
        .collect();
    let (slope, _) = linear_fit(&xs, values);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if mean == 0.0 {
        return if slope == 0.0 { 0.0 } else { f64::INFINITY };
    }
    slope / mean
}

/// Standard normal cumulative distribution function.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Two-sided Kolmogorov–Smirnov statistic of `samples` against a continuous
/// CDF, together with the asymptotic p-value.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    // Kolmogorov distribution tail.
    let mut p = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = 2.0 * (-1f64).powi(j - 1) * (-2.0 * jf * jf * lambda * lambda).exp();
        p += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    (d, p.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_small_inputs() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 499_500.0);
    }

    #[test]
    fn mean_estimate_of_constant_has_zero_error() {
        let est = MeanEstimate::from_samples(&[2.5; 10]);
        assert_eq!(est.mean, 2.5);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn linear_fit_recovers_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        let (m, b) = linear_fit(&xs, &ys);
        assert!((m - 2.0).abs() < 1e-14 && (b - 1.0).abs() < 1e-14);
    }

    #[test]
    fn flat_response_has_zero_trend() {
        assert_eq!(relative_trend(&[3.0, 5.0, 8.0], &[2.0, 2.0, 2.0]), 0.0);
    }

    #[test]
    fn normal_cdf_reference_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        let p = normal_cdf(1.959963984540054);
        assert!((p - 0.975).abs() < 1e-11, "{p}");
    }
}
