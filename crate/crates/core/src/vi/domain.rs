use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Uniform grid on the box `[−R, R]ⁿ` around the ball `O_R`. Nodes with
/// `‖x‖ < R` are unknowns; all others carry the Dirichlet value 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    radius: f64,
    counts: Vec<usize>,
}

impl DomainSpec {
    /// `counts[k]` nodes on axis `k`; counts must be odd so that the origin
    /// is a node.
    pub fn new(radius: f64, counts: Vec<usize>) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Input(format!("radius must be positive, got {radius}")));
        }
        if counts.is_empty() || counts.len() > 3 {
            return Err(Error::Dimension {
                got: counts.len(),
                max: 3,
            });
        }
        if let Some(c) = counts.iter().find(|&&c| c < 3 || c % 2 == 0) {
            return Err(Error::Input(format!("node counts must be odd and >= 3, got {c}")));
        }
        Ok(Self { radius, counts })
    }

    /// Grid with the given spacing per axis; `2R / h` must be an even
    /// integer.
    pub fn with_spacing(radius: f64, spacing: &[f64]) -> Result<Self> {
        let counts = spacing
            .iter()
            .map(|&h| {
                let cells = 2.0 * radius / h;
                let rounded = cells.round();
                if !(h > 0.0) || (cells - rounded).abs() > 1e-9 * cells.max(1.0) || rounded as usize % 2 != 0 {
                    return Err(Error::Input(format!(
                        "spacing {h} does not divide [-{radius}, {radius}] into an even number of cells"
                    )));
                }
                Ok(rounded as usize + 1)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(radius, counts)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        2.0 * self.radius / (self.counts[axis] - 1) as f64
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        // symmetric formula keeps the centre node at exactly 0
        let mid = (self.counts[axis] - 1) / 2;
        (i as f64 - mid as f64) * self.spacing(axis)
    }

    /// Stride of `axis` in the flat (last axis fastest) layout.
    pub fn stride(&self, axis: usize) -> usize {
        self.counts[axis + 1..].iter().product()
    }

    pub fn multi_index(&self, mut flat: usize, out: &mut [usize]) {
        for axis in (0..self.dim()).rev() {
            out[axis] = flat % self.counts[axis];
            flat /= self.counts[axis];
        }
    }

    pub fn node(&self, flat: usize, out: &mut [f64]) {
        let mut idx = vec![0; self.dim()];
        self.multi_index(flat, &mut idx);
        for (axis, o) in out.iter_mut().enumerate() {
            *o = self.coord(axis, idx[axis]);
        }
    }

    pub fn is_interior_point(&self, x: &[f64]) -> bool {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        r2.sqrt() < self.radius * (1.0 - 1e-12)
    }

    pub fn is_interior(&self, flat: usize) -> bool {
        let mut x = vec![0.0; self.dim()];
        self.node(flat, &mut x);
        self.is_interior_point(&x)
    }

    /// Flat index of the node nearest to `x` when `x` lies on the grid
    /// within `1e-9` relative spacing.
    pub fn locate_node(&self, x: &[f64]) -> Option<usize> {
        let mut flat = 0;
        for axis in 0..self.dim() {
            let h = self.spacing(axis);
            let s = (x[axis] + self.radius) / h;
            let i = s.round();
            if (s - i).abs() > 1e-9 || i < 0.0 || i as usize >= self.counts[axis] {
                return None;
            }
            flat = flat * self.counts[axis] + i as usize;
        }
        Some(flat)
    }

    /// Multilinear interpolation weights: up to `2ⁿ` `(flat index, weight)`
    /// pairs, or `None` outside the box.
    pub fn interpolation(&self, x: &[f64]) -> Option<Vec<(usize, f64)>> {
        let n = self.dim();
        let mut base = vec![0usize; n];
        let mut frac = vec![0.0; n];
        for axis in 0..n {
            let h = self.spacing(axis);
            let s = (x[axis] + self.radius) / h;
            if !(s >= -1e-12 && s <= (self.counts[axis] - 1) as f64 + 1e-12) {
                return None;
            }
            let i = (s.floor().max(0.0) as usize).min(self.counts[axis] - 2);
            base[axis] = i;
            frac[axis] = (s - i as f64).clamp(0.0, 1.0);
        }
        let mut out = Vec::with_capacity(1 << n);
        for corner in 0..(1usize << n) {
            let mut w = 1.0;
            let mut flat = 0;
            for axis in 0..n {
                let up = (corner >> axis) & 1 == 1;
                w *= if up { frac[axis] } else { 1.0 - frac[axis] };
                flat = flat * self.counts[axis] + base[axis] + usize::from(up);
            }
            if w != 0.0 {
                out.push((flat, w));
            }
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_grid_has_centre_node() {
        let d = DomainSpec::new(5.0, vec![801]).unwrap();
        assert_eq!(d.spacing(0), 0.0125);
        assert_eq!(d.coord(0, 400), 0.0);
        assert_eq!(d.coord(0, 480), 1.0);
        assert!(!d.is_interior(0) && !d.is_interior(800) && d.is_interior(1));
        assert_eq!(d.locate_node(&[1.0]), Some(480));
    }

    #[test]
    fn spacing_constructor() {
        let d = DomainSpec::with_spacing(3.0, &[0.025, 0.25]).unwrap();
        assert_eq!(d.counts(), &[241, 25]);
        assert!(DomainSpec::with_spacing(3.0, &[0.7]).is_err());
    }

    #[test]
    fn interpolation_reproduces_affine_functions() {
        let d = DomainSpec::new(2.0, vec![9, 5]).unwrap();
        let f = |x: &[f64]| 1.0 + 2.0 * x[0] - 0.5 * x[1];
        let vals: Vec<f64> = (0..d.len())
            .map(|i| {
                let mut x = [0.0; 2];
                d.node(i, &mut x);
                f(&x)
            })
            .collect();
        let x = [0.37, -1.21];
        let v: f64 = d.interpolation(&x).unwrap().iter().map(|&(i, w)| w * vals[i]).sum();
        assert!((v - f(&x)).abs() < 1e-14);
        assert!(d.interpolation(&[2.5, 0.0]).is_none());
    }
}
