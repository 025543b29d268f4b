//! Dense column-major matrices and the small amount of linear algebra the
//! pipeline needs: products, a cyclic Jacobi eigensolver for symmetric
//! matrices, and power iteration for the spectral norm.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, check_finite, Error, Result};

/// Dense `rows x cols` matrix stored column by column.
///
/// Data points, atoms and embeddings are all stored as columns, so `col(j)`
/// is the natural accessor.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from column-major storage.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_dim("matrix storage", rows * cols, data.len())?;
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from row-major storage.
    pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        check_dim("matrix storage", rows * cols, data.len())?;
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = data[i * cols + j];
            }
        }
        Ok(m)
    }

    /// Builds a matrix whose columns are the given slices.
    pub fn from_columns<C: AsRef<[f64]>>(columns: &[C]) -> Result<Self> {
        let cols = columns.len();
        if cols == 0 {
            return Err(Error::Empty("matrix columns"));
        }
        let rows = columns[0].as_ref().len();
        let mut data = Vec::with_capacity(rows * cols);
        for c in columns {
            let c = c.as_ref();
            check_dim("column length", rows, c.len())?;
            data.extend_from_slice(c);
        }
        Ok(Matrix { rows, cols, data })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> + '_ {
        // chunks_exact panics on zero-sized chunks
        (0..self.cols).map(move |j| self.col(j))
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols).map(|j| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for i in 0..self.rows {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn check_finite(&self, what: &'static str) -> Result<()> {
        check_finite(what, &self.data)
    }

    /// `self * x`.
    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("matrix-vector product", self.cols, x.len())?;
        let mut out = vec![0.0; self.rows];
        self.mul_vec_into(x, &mut out);
        Ok(out)
    }

    /// `out = self * x`, skipping zero entries of `x`.
    #[inline]
    pub(crate) fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                axpy(xj, self.col(j), out);
            }
        }
    }

    /// `self^T * v`.
    pub fn tr_mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_dim("transposed matrix-vector product", self.rows, v.len())?;
        Ok(self.columns().map(|c| dot(c, v)).collect())
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        check_dim("matrix product", self.cols, other.rows)?;
        let mut out = Matrix::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let dst = &mut out.data[j * self.rows..(j + 1) * self.rows];
            for (k, &b) in other.col(j).iter().enumerate() {
                if b != 0.0 {
                    axpy(b, &self.data[k * self.rows..(k + 1) * self.rows], dst);
                }
            }
        }
        Ok(out)
    }

    /// `self^T * self`.
    pub fn gram(&self) -> Matrix {
        let n = self.cols;
        let mut g = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = dot(self.col(i), self.col(j));
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|v| v * v).sum())
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Concatenates the columns of `self` and `other`.
    pub fn hstack(&self, other: &Matrix) -> Result<Matrix> {
        check_dim("hstack rows", self.rows, other.rows)?;
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols + other.cols,
            data,
        })
    }

    /// Keeps the listed columns, in order.
    pub fn select_columns(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.rows);
        for &j in idx {
            data.extend_from_slice(self.col(j));
        }
        Matrix {
            rows: self.rows,
            cols: idx.len(),
            data,
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }
}

impl core::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[j * self.rows + i]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[j * self.rows + i]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += a * x`
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `i` is the unit eigenvector for `values[i]`.
    pub vectors: Matrix,
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigensolver for a symmetric matrix.
///
/// Only the upper triangle is read. Eigenvalues are returned in ascending
/// order; equal eigenvalues keep the order in which the sweep left them, which
/// is deterministic for a given input.
pub fn symmetric_eigen(a: &Matrix) -> Result<SymmetricEigen> {
    let n = a.rows();
    check_dim("symmetric eigensolve (square)", n, a.cols())?;
    if n == 0 {
        return Err(Error::Empty("eigensolve input"));
    }
    a.check_finite("eigensolve input")?;

    let mut w = a.clone();
    for j in 0..n {
        for i in (j + 1)..n {
            w[(i, j)] = w[(j, i)];
        }
    }
    let mut v = Matrix::identity(n);
    let scale = w.frobenius_norm().max(f64::MIN_POSITIVE);

    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for j in 0..n {
            for i in 0..j {
                off += w[(i, j)] * w[(i, j)];
            }
        }
        if libm::sqrt(off) <= 1e-15 * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = w[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let app = w[(p, p)];
                let aqq = w[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let wkp = w[(k, p)];
                    let wkq = w[(k, q)];
                    w[(k, p)] = c * wkp - s * wkq;
                    w[(k, q)] = s * wkp + c * wkq;
                }
                for k in 0..n {
                    let wpk = w[(p, k)];
                    let wqk = w[(q, k)];
                    w[(p, k)] = c * wpk - s * wqk;
                    w[(q, k)] = s * wpk + c * wqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::NotConverged(JACOBI_MAX_SWEEPS));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w[(i, i)].total_cmp(&w[(j, j)]));
    let values = order.iter().map(|&i| w[(i, i)]).collect();
    let vectors = v.select_columns(&order);
    Ok(SymmetricEigen { values, vectors })
}

/// Largest singular value of `a` by power iteration on `a^T a`, to the given
/// relative tolerance on the eigenvalue estimate.
pub fn spectral_norm(a: &Matrix, rel_tol: f64) -> Result<f64> {
    a.check_finite("spectral norm input")?;
    if a.as_slice().iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate("all-zero matrix has no spectral norm".into()));
    }
    let m = a.cols();
    // Fixed, non-symmetric start so it is not orthogonal to the top vector
    // for structured inputs.
    let mut v: Vec<f64> = (0..m).map(|j| 1.0 + 0.1 * libm::sin(j as f64 + 1.0)).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut av = vec![0.0; a.rows()];
    let mut w = vec![0.0; m];
    let mut prev = 0.0;
    const MAX_ITER: usize = 100_000;
    for it in 0..MAX_ITER {
        a.mul_vec_into(&v, &mut av);
        for (j, wj) in w.iter_mut().enumerate() {
            *wj = dot(a.col(j), &av);
        }
        let rayleigh = dot(&v, &w);
        let nw = norm(&w);
        if nw == 0.0 {
            // Start vector in the null space; restart from a coordinate vector.
            v.iter_mut().for_each(|x| *x = 0.0);
            v[it % m] = 1.0;
            continue;
        }
        v.iter_mut().zip(&w).for_each(|(x, y)| *x = y / nw);
        // Rayleigh quotient error decays with the square of the vector error,
        // so a tight stopping rule on it is cheap.
        if it > 0 && (rayleigh - prev).abs() <= rel_tol * 1e-3 * rayleigh.abs() {
            return Ok(libm::sqrt(rayleigh));
        }
        prev = rayleigh;
    }
    Err(Error::NotConverged(MAX_ITER))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_diagonal_and_two_by_two() {
        let a = Matrix::from_row_major(2, 2, &[2.0, 1.0, 1.0, 2.0]).unwrap();
        let e = symmetric_eigen(&a).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-14);
        assert!((e.values[1] - 3.0).abs() < 1e-14);
        let v0 = e.vectors.col(0);
        assert!((v0[0] + v0[1]).abs() < 1e-14);
    }

    #[test]
    fn jacobi_reconstructs() {
        let a = Matrix::from_row_major(
            3,
            3,
            &[4.0, -2.0, 0.5, -2.0, 3.0, 1.0, 0.5, 1.0, -1.0],
        )
        .unwrap();
        let e = symmetric_eigen(&a).unwrap();
        for (k, &lam) in e.values.iter().enumerate() {
            let v = e.vectors.col(k);
            let av = a.mul_vec(v).unwrap();
            for i in 0..3 {
                assert!((av[i] - lam * v[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn spectral_norm_of_scaled_identity() {
        assert!((spectral_norm(&Matrix::identity(2), 1e-8).unwrap() - 1.0).abs() < 1e-12);
        let mut two = Matrix::identity(2);
        two.scale(2.0);
        assert!((spectral_norm(&two, 1e-8).unwrap() - 2.0).abs() < 1e-12);
        assert!(spectral_norm(&Matrix::zeros(2, 3), 1e-8).is_err());
    }

    #[test]
    fn matmul_against_index_loop() {
        let a = Matrix::from_row_major(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = Matrix::from_row_major(3, 2, &[1.0, 0.0, -1.0, 2.0, 0.5, 1.0]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.row(0), vec![1.0 - 2.0 + 1.5, 4.0 + 3.0]);
        assert_eq!(c.row(1), vec![4.0 - 5.0 + 3.0, 10.0 + 6.0]);
    }
}
