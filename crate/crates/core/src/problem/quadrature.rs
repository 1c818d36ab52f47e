use nalgebra::{DMatrix, SymmetricEigen};

/// Gauss–Hermite rule for the standard normal weight, nodes ascending,
/// weights summing to one. Built by Golub–Welsch from the Jacobi matrix of the
/// probabilists' Hermite polynomials (zero diagonal, off-diagonal `√k`).
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl HermiteRule {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss-Hermite order must be positive");
        if order == 1 {
            return Self {
                nodes: vec![0.0],
                weights: vec![1.0],
            };
        }
        let mut jacobi = DMatrix::<f64>::zeros(order, order);
        for k in 1..order {
            let b = (k as f64).sqrt();
            jacobi[(k - 1, k)] = b;
            jacobi[(k, k - 1)] = b;
        }
        let eig = SymmetricEigen::new(jacobi);
        let mut pairs: Vec<(f64, f64)> = (0..order)
            .map(|i| {
                let v0 = eig.eigenvectors[(0, i)];
                (eig.eigenvalues[i], v0 * v0)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        // Symmetrize to remove the tiny asymmetry left by the eigensolver.
        let m = order;
        for i in 0..m / 2 {
            let x = 0.5 * (pairs[m - 1 - i].0 - pairs[i].0);
            let w = 0.5 * (pairs[m - 1 - i].1 + pairs[i].1);
            pairs[i] = (-x, w);
            pairs[m - 1 - i] = (x, w);
        }
        if m % 2 == 1 {
            pairs[m / 2].0 = 0.0;
        }
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1 / total).collect(),
        }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_normal_moments_exactly() {
        let rule = HermiteRule::new(10);
        let moment = |k: i32| -> f64 {
            rule.nodes
                .iter()
                .zip(&rule.weights)
                .map(|(x, w)| w * x.powi(k))
                .sum()
        };
        assert!((moment(0) - 1.0).abs() < 1e-14);
        assert!(moment(1).abs() < 1e-14);
        assert!((moment(2) - 1.0).abs() < 1e-13);
        assert!((moment(4) - 3.0).abs() < 1e-12);
        assert!((moment(8) - 105.0).abs() < 1e-10);
    }

    #[test]
    fn high_order_rule_is_normalized() {
        let rule = HermiteRule::new(64);
        let total: f64 = rule.weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-13);
        assert!(rule.nodes.windows(2).all(|w| w[0] < w[1]));
    }
}
