//! Packed lower-triangular Cholesky factor with row appends.
//!
//! Rows are stored contiguously (row `i` starts at `i * (i + 1) / 2`), so
//! growing the factor by one observation is a plain `extend` and forward
//! substitution walks memory linearly.

use crate::error::{Error, Result};

/// Diagonal jitter levels tried in order when a factorization fails.
pub const JITTER_LADDER: [f64; 6] = [0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

#[derive(Debug, Clone, Default)]
pub struct Cholesky {
    n: usize,
    data: Vec<f64>,
    jitter: f64,
}

#[inline]
fn row_start(i: usize) -> usize {
    i * (i + 1) / 2
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Cholesky {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Factor a dense symmetric matrix given row-major as `n * n` values,
    /// escalating diagonal jitter along [`JITTER_LADDER`].
    pub fn factor(a: &[f64], n: usize) -> Result<Self> {
        debug_assert_eq!(a.len(), n * n);
        for &jitter in JITTER_LADDER.iter() {
            if let Some(data) = Self::try_factor(a, n, jitter) {
                if jitter > 0.0 {
                    log::debug!("cholesky needed jitter {jitter:e} at n = {n}");
                }
                return Ok(Self { n, data, jitter });
            }
        }
        Err(Error::NotPositiveDefinite(
            JITTER_LADDER[JITTER_LADDER.len() - 1],
        ))
    }

    fn try_factor(a: &[f64], n: usize, jitter: f64) -> Option<Vec<f64>> {
        let mut l = vec![0.0; row_start(n)];
        for i in 0..n {
            let ri = row_start(i);
            for j in 0..=i {
                let rj = row_start(j);
                let s = dot(&l[ri..ri + j], &l[rj..rj + j]);
                if i == j {
                    let d = a[i * n + i] + jitter - s;
                    if !(d > 0.0) || !d.is_finite() {
                        return None;
                    }
                    l[ri + i] = d.sqrt();
                } else {
                    l[ri + j] = (a[i * n + j] - s) / l[rj + j];
                }
            }
        }
        Some(l)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Jitter that was added to the diagonal to obtain this factor.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.data[row_start(i) + j]
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let r = row_start(i);
        &self.data[r..r + i + 1]
    }

    /// Append one row/column: `cross` holds the covariances with the existing
    /// points, `diag` the new diagonal entry (noise already included).
    /// Returns `false` and leaves the factor untouched if the Schur
    /// complement is not positive.
    pub fn try_append(&mut self, cross: &[f64], diag: f64) -> bool {
        debug_assert_eq!(cross.len(), self.n);
        let v = self.solve_lower(cross);
        let d = diag + self.jitter - dot(&v, &v);
        if !(d > 1e-14 * diag.abs().max(1.0)) || !d.is_finite() {
            return false;
        }
        self.data.extend_from_slice(&v);
        self.data.push(d.sqrt());
        self.n += 1;
        true
    }

    /// Solve `L v = b`.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let mut v = b.to_vec();
        self.solve_lower_in_place(&mut v);
        v
    }

    pub fn solve_lower_in_place(&self, v: &mut [f64]) {
        for i in 0..self.n {
            let r = self.row(i);
            let s = dot(&r[..i], &v[..i]);
            v[i] = (v[i] - s) / r[i];
        }
    }

    /// Solve `Lᵀ x = b`.
    pub fn solve_upper_in_place(&self, x: &mut [f64]) {
        for i in (0..self.n).rev() {
            let r = self.row(i);
            x[i] /= r[i];
            let xi = x[i];
            for (xj, lij) in x[..i].iter_mut().zip(&r[..i]) {
                *xj -= lij * xi;
            }
        }
    }

    /// Solve `L Lᵀ x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_lower_in_place(&mut x);
        self.solve_upper_in_place(&mut x);
        x
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.n).map(|i| self.row(i)[i].ln()).sum::<f64>()
    }

    /// Dense row-major `(L Lᵀ)⁻¹`, built as `L⁻ᵀ L⁻¹` from the packed inverse factor.
    pub fn inverse(&self) -> Vec<f64> {
        let n = self.n;
        // rows of L⁻¹, packed like L
        let mut inv = vec![0.0; row_start(n)];
        for i in 0..n {
            let ri = row_start(i);
            let lii = self.data[ri + i];
            inv[ri + i] = 1.0 / lii;
            for j in (0..i).rev() {
                // (L⁻¹)_ij = -(Σ_{k=j}^{i-1} L_ik (L⁻¹)_kj) / L_ii
                let mut s = 0.0;
                for k in j..i {
                    s += self.data[ri + k] * inv[row_start(k) + j];
                }
                inv[ri + j] = -s / lii;
            }
        }
        let mut out = vec![0.0; n * n];
        for k in 0..n {
            let rk = &inv[row_start(k)..row_start(k) + k + 1];
            for i in 0..=k {
                let a = rk[i];
                let row = &mut out[i * n..i * n + i + 1];
                for (o, b) in row.iter_mut().zip(&rk[..=i]) {
                    *o += a * b;
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                out[j * n + i] = out[i * n + j];
            }
        }
        out
    }

    /// Dense row-major `L Lᵀ`, used by invariant checks.
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = dot(&self.row(i)[..=j], &self.row(j)[..=j]);
                out[i * n + j] = v;
                out[j * n + i] = v;
            }
        }
        out
    }
}

/// Dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }
}
