//! Compressed sparse rows, ILU(0) and preconditioned BiCGSTAB. On the
//! tridiagonal matrices of one-dimensional grids ILU(0) is the exact LU
//! factorization, so the iteration terminates after one step.

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    diag_pos: Vec<usize>,
}

impl CsrMatrix {
    /// Builds from per-row `(column, value)` lists; duplicates are summed,
    /// and every row receives an explicit diagonal entry.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut diag_pos = Vec::with_capacity(n);
        row_ptr.push(0);
        for (i, mut row) in rows.into_iter().enumerate() {
            row.push((i, 0.0));
            row.sort_by_key(|&(c, _)| c);
            let start = cols.len();
            for (c, v) in row {
                if cols.len() > start && *cols.last().expect("nonempty") == c {
                    *vals.last_mut().expect("nonempty") += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            let d = start + cols[start..].iter().position(|&c| c == i).expect("diagonal inserted");
            diag_pos.push(d);
            row_ptr.push(cols.len());
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
            diag_pos,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.vals[self.diag_pos[i]]
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            *yi = s;
        }
    }

    /// `a·I + b·self`.
    pub fn affine(&self, a: f64, b: f64) -> Self {
        let mut out = self.clone();
        for v in out.vals.iter_mut() {
            *v *= b;
        }
        for &d in &out.diag_pos {
            out.vals[d] += a;
        }
        out
    }

    /// `self + diag(d)`.
    pub fn plus_diagonal(&self, d: &[f64]) -> Self {
        let mut out = self.clone();
        for (i, &p) in out.diag_pos.iter().enumerate() {
            out.vals[p] += d[i];
        }
        out
    }

    /// Largest diagonal magnitude, for explicit-step stability checks.
    pub fn max_abs_diag(&self) -> f64 {
        self.diag_pos.iter().fold(0.0, |m, &p| m.max(self.vals[p].abs()))
    }
}

/// Incomplete LU factorization with the sparsity of the matrix.
#[derive(Debug, Clone)]
pub struct Ilu0 {
    lu: CsrMatrix,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let mut lu = a.clone();
        let n = lu.n;
        // column -> position lookup for the current row
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (start, end) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            for k in start..end {
                pos[lu.cols[k]] = k;
            }
            for k in start..end {
                let j = lu.cols[k];
                if j >= i {
                    break;
                }
                let pivot = lu.vals[lu.diag_pos[j]];
                let factor = lu.vals[k] / pivot;
                lu.vals[k] = factor;
                for m in lu.diag_pos[j] + 1..lu.row_ptr[j + 1] {
                    let c = lu.cols[m];
                    let p = pos[c];
                    if p != usize::MAX {
                        lu.vals[p] -= factor * lu.vals[m];
                    }
                }
            }
            for k in start..end {
                pos[lu.cols[k]] = usize::MAX;
            }
            let d = lu.vals[lu.diag_pos[i]];
            if !(d.abs() > 0.0 && d.is_finite()) {
                return Err(Error::LinearSolve {
                    residual: f64::NAN,
                    iterations: 0,
                });
            }
        }
        Ok(Self { lu })
    }

    /// Solves `L U z = r` in place.
    pub fn apply(&self, z: &mut [f64]) {
        let lu = &self.lu;
        for i in 0..lu.n {
            let mut s = z[i];
            for k in lu.row_ptr[i]..lu.diag_pos[i] {
                s -= lu.vals[k] * z[lu.cols[k]];
            }
            z[i] = s;
        }
        for i in (0..lu.n).rev() {
            let mut s = z[i];
            for k in lu.diag_pos[i] + 1..lu.row_ptr[i + 1] {
                s -= lu.vals[k] * z[lu.cols[k]];
            }
            z[i] = s / lu.vals[lu.diag_pos[i]];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// ILU(0)-preconditioned BiCGSTAB; `x` holds the initial guess on entry.
/// Converged when `‖b − Ax‖_∞ ≤ tol`.
pub fn bicgstab(a: &CsrMatrix, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<usize> {
    let n = a.dim();
    let pre = Ilu0::new(a)?;
    let mut r = vec![0.0; n];
    a.matvec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    if max_abs(&r) <= tol {
        return Ok(0);
    }
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut res = max_abs(&r);
    for it in 1..=max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        y.copy_from_slice(&p);
        pre.apply(&mut y);
        a.matvec(&y, &mut v);
        alpha = rho_new / dot(&r_hat, &v);
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if max_abs(&s) <= tol {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            return Ok(it);
        }
        z.copy_from_slice(&s);
        pre.apply(&mut z);
        a.matvec(&z, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        res = max_abs(&r);
        if res <= tol {
            return Ok(it);
        }
        if omega == 0.0 || !res.is_finite() {
            break;
        }
        rho = rho_new;
    }
    Err(Error::LinearSolve {
        residual: res,
        iterations: max_iter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_2d(m: usize) -> CsrMatrix {
        let idx = |i: usize, j: usize| i * m + j;
        let mut rows = Vec::new();
        for i in 0..m {
            for j in 0..m {
                let mut row = vec![(idx(i, j), 4.5)];
                if i > 0 {
                    row.push((idx(i - 1, j), -1.0));
                }
                if i + 1 < m {
                    row.push((idx(i + 1, j), -1.2));
                }
                if j > 0 {
                    row.push((idx(i, j - 1), -0.8));
                }
                if j + 1 < m {
                    row.push((idx(i, j + 1), -1.0));
                }
                rows.push(row);
            }
        }
        CsrMatrix::from_rows(rows)
    }

    #[test]
    fn tridiagonal_solved_in_one_step() {
        let n = 50;
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![(i, 3.0)];
                if i > 0 {
                    r.push((i - 1, -1.0));
                }
                if i + 1 < n {
                    r.push((i + 1, -1.5));
                }
                r
            })
            .collect();
        let a = CsrMatrix::from_rows(rows);
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut x = vec![0.0; n];
        let it = bicgstab(&a, &b, &mut x, 1e-13, 10).unwrap();
        assert!(it <= 1);
        let mut ax = vec![0.0; n];
        a.matvec(&x, &mut ax);
        assert!(ax.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-13));
    }

    #[test]
    fn nonsymmetric_2d_system() {
        let a = laplacian_2d(30);
        let n = a.dim();
        let b: Vec<f64> = (0..n).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let mut x = vec![0.0; n];
        bicgstab(&a, &b, &mut x, 1e-12, 200).unwrap();
        let mut ax = vec![0.0; n];
        a.matvec(&x, &mut ax);
        assert!(ax.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-11));
    }
}
