//! Dense linear algebra used throughout the crate.
//!
//! Problem dimensions stay small (tens of variables), so everything here is
//! dense, row-major and allocation-light. Vectors are plain `[f64]` slices;
//! the helpers below cover the handful of BLAS-1 operations the solvers need.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative pivot threshold below which a matrix is declared not positive definite.
pub const PIVOT_TOLERANCE: f64 = 1e-14;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scaled(alpha: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| alpha * v).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// `Σ_j w_j v_j` for equally sized vectors.
pub fn weighted_sum(weights: &[f64], vectors: &[Vec<f64>]) -> Vec<f64> {
    debug_assert_eq!(weights.len(), vectors.len());
    let n = vectors.first().map_or(0, Vec::len);
    let mut out = vec![0.0; n];
    for (w, v) in weights.iter().zip(vectors) {
        axpy(*w, v, &mut out);
    }
    out
}

/// Symmetric dense matrix, stored in full so that row access is contiguous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n);
        for (i, d) in diag.iter().enumerate() {
            m.data[i * n + i] = *d;
        }
        m
    }

    /// Builds a matrix from rows, enforcing symmetry by averaging `(i,j)` and `(j,i)`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            m.data[i * n..(i + 1) * n].copy_from_slice(row);
        }
        m.symmetrize();
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn max_diagonal(&self) -> f64 {
        (0..self.n)
            .map(|i| self.get(i, i))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n);
        (0..self.n).map(|i| dot(self.row(i), x)).collect()
    }

    /// `xᵀ A x`
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.mul_vec(x))
    }

    /// `self += alpha * other`
    pub fn add_scaled(&mut self, alpha: f64, other: &SymMatrix) {
        debug_assert_eq!(self.n, other.n);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    /// `self += alpha * (u vᵀ + v uᵀ) / 2`, i.e. the symmetric part of a rank-two term.
    /// With `u == v` this is the rank-one update `alpha * u uᵀ`.
    pub fn add_sym_outer(&mut self, alpha: f64, u: &[f64], v: &[f64]) {
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                self.data[i * n + j] += 0.5 * alpha * (u[i] * v[j] + v[i] * u[j]);
            }
        }
    }

    /// `Σ_j w_j A_j`
    pub fn weighted_sum(weights: &[f64], mats: &[SymMatrix]) -> SymMatrix {
        let n = mats.first().map_or(0, SymMatrix::dim);
        let mut out = SymMatrix::zeros(n);
        for (w, m) in weights.iter().zip(mats) {
            if *w != 0.0 {
                out.add_scaled(*w, m);
            }
        }
        out
    }

    pub fn symmetrize(&mut self) {
        let n = self.n;
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (self.data[i * n + j] + self.data[j * n + i]);
                self.data[i * n + j] = avg;
                self.data[j * n + i] = avg;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        all_finite(&self.data)
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    n: usize,
    l: Vec<f64>,
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.l[i * self.n + j]
    }

    /// Solves `L Lᵀ z = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        let mut z = b.to_vec();
        for i in 0..n {
            let mut acc = z[i];
            for k in 0..i {
                acc -= self.l[i * n + k] * z[k];
            }
            z[i] = acc / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut acc = z[i];
            for k in (i + 1)..n {
                acc -= self.l[k * n + i] * z[k];
            }
            z[i] = acc / self.l[i * n + i];
        }
        z
    }

    /// `ln det A = 2 Σ ln L_ii`
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.n).map(|i| self.get(i, i).ln()).sum::<f64>()
    }

    /// Reconstructs `L Lᵀ`.
    pub fn reconstruct(&self) -> SymMatrix {
        let n = self.n;
        let mut rows = vec![vec![0.0; n]; n];
        for (i, row) in rows.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..=i.min(j)).map(|k| self.get(i, k) * self.get(j, k)).sum();
            }
        }
        SymMatrix::from_rows(&rows).expect("square by construction")
    }
}

/// Cholesky factorization; fails when a pivot drops to `1e-14 * max_diagonal` or below.
pub fn cholesky(a: &SymMatrix) -> Result<CholeskyFactor> {
    let n = a.dim();
    let max_diag = a.max_diagonal();
    if n == 0 || !(max_diag > 0.0) || !a.is_finite() {
        return Err(Error::NotPositiveDefinite {
            index: 0,
            pivot: if n == 0 { 0.0 } else { a.get(0, 0) },
        });
    }
    let threshold = PIVOT_TOLERANCE * max_diag;
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut pivot = a.get(j, j);
        for k in 0..j {
            pivot -= l[j * n + k] * l[j * n + k];
        }
        if !(pivot > threshold) {
            return Err(Error::NotPositiveDefinite { index: j, pivot });
        }
        let ljj = pivot.sqrt();
        l[j * n + j] = ljj;
        for i in (j + 1)..n {
            let mut acc = a.get(i, j);
            for k in 0..j {
                acc -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = acc / ljj;
        }
    }
    Ok(CholeskyFactor { n, l })
}

pub fn solve_spd(a: &SymMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.len(),
        });
    }
    Ok(cholesky(a)?.solve(b))
}

/// Solves a small general linear system by Gaussian elimination with partial
/// pivoting; `None` if a pivot vanishes.
pub fn solve_dense(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, bi)| row.iter().copied().chain([*bi]).collect())
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))?;
        if !(m[p][c].abs() > 0.0) {
            return None;
        }
        m.swap(c, p);
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..=n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let tail: f64 = (r + 1..n).map(|k| m[r][k] * x[k]).sum();
        x[r] = (m[r][n] - tail) / m[r][r];
    }
    all_finite(&x).then_some(x)
}

/// Euclidean projection onto the unit simplex `{λ : Σλ = 1, λ ≥ 0}`.
///
/// Sort-and-threshold; ties are ordered by index so the result is
/// deterministic. Points already on the simplex (to rounding) are returned
/// unchanged, which makes the projection exactly idempotent.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let m = v.len();
    assert!(m >= 1, "cannot project an empty vector onto the simplex");
    let sum: f64 = v.iter().sum();
    if v.iter().all(|&x| x >= 0.0) && (sum - 1.0).abs() <= 4.0 * f64::EPSILON * m as f64 {
        return v.to_vec();
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    let mut cumulative = 0.0;
    let mut tau = 0.0;
    for (k, &idx) in order.iter().enumerate() {
        cumulative += v[idx];
        let candidate = (cumulative - 1.0) / (k + 1) as f64;
        if v[idx] - candidate > 0.0 {
            tau = candidate;
        }
    }
    v.iter().map(|&x| (x - tau).max(0.0)).collect()
}
