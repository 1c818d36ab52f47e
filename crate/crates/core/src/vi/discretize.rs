use super::sparse::CsrMatrix;
use super::DomainSpec;
use crate::operators::{ForcingField, GeneratorCoefficients};
use crate::{Error, Result};

/// Cell Péclet number above which the drift is upwinded.
pub const PECLET_LIMIT: f64 = 2.0;

/// Finite-difference generator `L_h` restricted to the interior unknowns,
/// in non-divergence (Lebesgue) form: central second differences, the
/// four-point cross stencil, and central or upwind first differences.
#[derive(Debug, Clone)]
pub struct SpatialOperator {
    interior: Vec<usize>,
    index_of: Vec<usize>,
    points: Vec<f64>,
    dim: usize,
    matrix: CsrMatrix,
    upwinded: usize,
}

impl SpatialOperator {
    pub fn new(coeffs: &GeneratorCoefficients, dom: &DomainSpec) -> Result<Self> {
        let n = dom.dim();
        if coeffs.dim() != n {
            return Err(Error::Length {
                what: "grid dimension",
                expected: coeffs.dim(),
                got: n,
            });
        }
        let mut interior = Vec::new();
        let mut index_of = vec![usize::MAX; dom.len()];
        let mut points = Vec::new();
        let mut x = vec![0.0; n];
        for flat in 0..dom.len() {
            dom.node(flat, &mut x);
            if dom.is_interior_point(&x) {
                index_of[flat] = interior.len();
                interior.push(flat);
                points.extend_from_slice(&x);
            }
        }
        let h: Vec<f64> = (0..n).map(|k| dom.spacing(k)).collect();
        let strides: Vec<usize> = (0..n).map(|k| dom.stride(k)).collect();
        let mut b = vec![0.0; n * n];
        let mut drift = vec![0.0; n];
        let mut upwinded = 0;
        let mut rows = Vec::with_capacity(interior.len());
        for (row_idx, &flat) in interior.iter().enumerate() {
            let xi = &points[row_idx * n..(row_idx + 1) * n];
            coeffs.b_matrix(xi, &mut b);
            coeffs.drift_at(xi, &mut drift);
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(1 + 2 * n + 4 * n * (n - 1) / 2);
            let push = |target: usize, v: f64, row: &mut Vec<(usize, f64)>| {
                let j = index_of[target];
                if j != usize::MAX {
                    row.push((j, v));
                }
            };
            let mut diag = 0.0;
            for k in 0..n {
                let d = 0.5 * b[k * n + k];
                let hk = h[k];
                let plus = flat + strides[k];
                let minus = flat - strides[k];
                let diff = d / (hk * hk);
                let bk = drift[k];
                let (mut cp, mut cm) = (diff, diff);
                diag -= 2.0 * diff;
                let central = d > 0.0 && bk.abs() * hk / d <= PECLET_LIMIT;
                if central {
                    cp += bk / (2.0 * hk);
                    cm -= bk / (2.0 * hk);
                } else if bk != 0.0 {
                    upwinded += 1;
                    if bk > 0.0 {
                        cp += bk / hk;
                        diag -= bk / hk;
                    } else {
                        cm -= bk / hk;
                        diag += bk / hk;
                    }
                }
                push(plus, cp, &mut row);
                push(minus, cm, &mut row);
            }
            for k in 0..n {
                for l in k + 1..n {
                    let c = b[k * n + l];
                    if c == 0.0 {
                        continue;
                    }
                    let w = c / (4.0 * h[k] * h[l]);
                    let (sk, sl) = (strides[k], strides[l]);
                    push(flat + sk + sl, w, &mut row);
                    push(flat + sk - sl, -w, &mut row);
                    push(flat - sk + sl, -w, &mut row);
                    push(flat - sk - sl, w, &mut row);
                }
            }
            row.push((row_idx, diag));
            rows.push(row);
        }
        Ok(Self {
            interior,
            index_of,
            points,
            dim: n,
            matrix: CsrMatrix::from_rows(rows),
            upwinded,
        })
    }

    pub fn unknowns(&self) -> usize {
        self.interior.len()
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    /// Unknown index of a flat grid node, `None` for Dirichlet nodes.
    pub fn unknown_of(&self, flat: usize) -> Option<usize> {
        let j = self.index_of[flat];
        (j != usize::MAX).then_some(j)
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.points[j * self.dim..(j + 1) * self.dim]
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// Number of (node, axis) pairs that use the upwind drift stencil.
    pub fn upwinded(&self) -> usize {
        self.upwinded
    }

    /// `f(t, ·)` at the unknowns.
    pub fn forcing(&self, forcing: &ForcingField, t: f64, out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = forcing.value(t, self.point(j));
        }
    }

    pub fn gather(&self, full: &[f64], out: &mut [f64]) {
        for (o, &flat) in out.iter_mut().zip(&self.interior) {
            *o = full[flat];
        }
    }

    pub fn scatter(&self, unknowns: &[f64], full: &mut [f64]) {
        for (v, &flat) in unknowns.iter().zip(&self.interior) {
            full[flat] = *v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::YosidaMatrix;
    use crate::problem::{CovarianceSpec, DiffusionSpec, OperatorSpec};

    #[test]
    fn quadratic_is_differentiated_exactly_in_the_interior() {
        let op = OperatorSpec::diagonal(vec![-0.5, -1.0]);
        let cov = CovarianceSpec::new(vec![1.0, 0.5]).unwrap();
        let c = GeneratorCoefficients::new(
            YosidaMatrix::exact(&op, 2).unwrap(),
            DiffusionSpec::constant(vec![2.0, 2.0]),
            &cov,
            0.1,
        )
        .unwrap();
        let dom = DomainSpec::new(2.0, vec![41, 41]).unwrap();
        let l = SpatialOperator::new(&c, &dom).unwrap();
        assert_eq!(l.upwinded(), 0);
        // u = x² + x y + 2 y² on all nodes; compare away from the boundary
        let mut x = [0.0; 2];
        let full: Vec<f64> = (0..dom.len())
            .map(|i| {
                dom.node(i, &mut x);
                x[0] * x[0] + x[0] * x[1] + 2.0 * x[1] * x[1]
            })
            .collect();
        let mut u = vec![0.0; l.unknowns()];
        l.gather(&full, &mut u);
        let mut lu = vec![0.0; l.unknowns()];
        l.matrix().matvec(&u, &mut lu);
        let mut b = [0.0; 4];
        let mut ax = [0.0; 2];
        for j in 0..l.unknowns() {
            let p = l.point(j);
            if (p[0] * p[0] + p[1] * p[1]).sqrt() > 1.5 {
                continue;
            }
            c.b_matrix(p, &mut b);
            c.drift_at(p, &mut ax);
            let exact = 0.5 * (2.0 * b[0] + 2.0 * b[1] + 4.0 * b[3])
                + ax[0] * (2.0 * p[0] + p[1])
                + ax[1] * (p[0] + 4.0 * p[1]);
            assert!((lu[j] - exact).abs() < 1e-10, "{} vs {exact}", lu[j]);
        }
    }

    #[test]
    fn dominant_drift_is_upwinded() {
        let op = OperatorSpec::diagonal(vec![-50.0]);
        let cov = CovarianceSpec::new(vec![1.0]).unwrap();
        let c = GeneratorCoefficients::new(YosidaMatrix::exact(&op, 1).unwrap(), DiffusionSpec::zero(), &cov, 0.01)
            .unwrap();
        let dom = DomainSpec::new(1.0, vec![21]).unwrap();
        let l = SpatialOperator::new(&c, &dom).unwrap();
        assert!(l.upwinded() > 0);
        // off-diagonals of an upwinded row are nonnegative (M-matrix)
        for j in 0..l.unknowns() {
            for (col, v) in l.matrix().row(j) {
                if col != j {
                    assert!(v >= 0.0);
                }
            }
        }
    }
}
