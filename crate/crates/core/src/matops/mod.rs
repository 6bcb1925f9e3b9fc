//! Dense row-major matrices, a one-sided Jacobi SVD used as a reference
//! oracle, and the Newton-Schulz orthogonalizer.
//!
//! All arithmetic is `f64`. Products accumulate in a fixed order (ascending
//! inner index) so that results are reproducible bit-for-bit.

mod io;
mod newton_schulz;
mod svd;

pub use io::{read_binary, read_csv, write_binary, write_csv};
pub use newton_schulz::{newton_schulz, NewtonSchulzConfig};
pub use svd::{singular_value_range, svd, SvdResult};

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows.min(8) {
            write!(f, "  ")?;
            for c in 0..self.cols.min(8) {
                write!(f, "{:>12.6} ", self[(r, c)])?;
            }
            if self.cols > 8 {
                write!(f, "...")?;
            }
            writeln!(f)?;
        }
        if self.rows > 8 {
            writeln!(f, "  ...")?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    /// Builds a matrix from row-major data, validating shape and finiteness.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "matrix entry ({}, {})",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Internal constructor for results of arithmetic on valid matrices.
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self::from_raw(rows, cols, vec![0.0; rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Rectangular diagonal matrix with `diag` on the main diagonal.
    pub fn diag(rows: usize, cols: usize, diag: &[f64]) -> Self {
        let mut m = Self::zeros(rows, cols);
        for (i, &d) in diag.iter().enumerate().take(rows.min(cols)) {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self::from_raw(rows, cols, data)
    }

    /// Entries drawn i.i.d. from `N(0, std²)`.
    pub fn random_normal<R: Rng + ?Sized>(rows: usize, cols: usize, std: f64, rng: &mut R) -> Self {
        let data = (0..rows * cols)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                z * std
            })
            .collect();
        Self::from_raw(rows, cols, data)
    }

    /// `U·diag(s)·Vᵀ` with Haar-like orthonormal factors and singular values
    /// log-spaced at random in `[1, cond]`; the extremes `1` and `cond` are
    /// always present, so the condition number is exactly `cond`.
    pub fn random_conditioned<R: Rng + ?Sized>(rows: usize, cols: usize, cond: f64, rng: &mut R) -> Result<Self> {
        if rows == 0 || cols == 0 || !(cond >= 1.0 && cond.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "need a non-empty shape and finite cond >= 1, got {rows}x{cols}, cond {cond}"
            )));
        }
        let k = rows.min(cols);
        let u = svd(&Self::random_normal(rows, k, 1.0, rng))?.u;
        let v = svd(&Self::random_normal(cols, k, 1.0, rng))?.u;
        let mut s: Vec<f64> = (0..k).map(|_| cond.powf(rng.random::<f64>())).collect();
        s[0] = cond;
        if k > 1 {
            s[k - 1] = 1.0;
        }
        let us = Self::from_fn(rows, k, |r, c| u[(r, c)] * s[c]);
        Ok(us.matmul_nt(&v))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn check_finite(&self, what: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(what.to_string()))
        }
    }

    pub fn check_same_shape(&self, other: &Matrix) -> Result<()> {
        if self.shape() == other.shape() {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                expected: self.shape(),
                got: other.shape(),
            })
        }
    }

    pub fn transpose(&self) -> Matrix {
        const TILE: usize = 32;
        let mut out = vec![0.0; self.data.len()];
        for r0 in (0..self.rows).step_by(TILE) {
            for c0 in (0..self.cols).step_by(TILE) {
                for r in r0..(r0 + TILE).min(self.rows) {
                    for c in c0..(c0 + TILE).min(self.cols) {
                        out[c * self.rows + r] = self.data[r * self.cols + c];
                    }
                }
            }
        }
        Matrix::from_raw(self.cols, self.rows, out)
    }

    /// `self · rhs`.
    pub fn matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, rhs.rows,
            "matmul shape mismatch: {:?} x {:?}",
            self.shape(),
            rhs.shape()
        );
        let n = rhs.cols;
        let mut out = vec![0.0; self.rows * n];
        accumulate_blocked(&mut out, self, &rhs.data, n);
        Matrix::from_raw(self.rows, n, out)
    }

    /// `selfᵀ · rhs`.
    pub fn matmul_tn(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(
            self.rows, rhs.rows,
            "matmul_tn shape mismatch: {:?} x {:?}",
            self.shape(),
            rhs.shape()
        );
        let (m, n) = (self.cols, rhs.cols);
        let mut out = vec![0.0; m * n];
        // Row i of the result is Σ_p self[p, i] · rhs[p, :].
        let lhs_t = self.transpose();
        accumulate_blocked(&mut out, &lhs_t, &rhs.data, n);
        Matrix::from_raw(m, n, out)
    }

    /// `self · rhsᵀ`.
    pub fn matmul_nt(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, rhs.cols,
            "matmul_nt shape mismatch: {:?} x {:?}ᵀ",
            self.shape(),
            rhs.shape()
        );
        // Blocks of rhs rows stay cache-resident across all rows of self.
        const BLOCK: usize = 32;
        let n = rhs.rows;
        let mut out = vec![0.0; self.rows * n];
        for j0 in (0..n).step_by(BLOCK) {
            for i in 0..self.rows {
                let a = self.row(i);
                for j in j0..(j0 + BLOCK).min(n) {
                    out[i * n + j] = dot(a, rhs.row(j));
                }
            }
        }
        Matrix::from_raw(self.rows, n, out)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix::from_raw(self.rows, self.cols, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
        assert_eq!(self.shape(), other.shape(), "zip_map shape mismatch");
        Matrix::from_raw(
            self.rows,
            self.cols,
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn scale(&self, s: f64) -> Matrix {
        self.map(|v| v * s)
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        self.zip_map(other, |a, b| a - b)
    }

    /// `self + s · other`.
    pub fn add_scaled(&self, other: &Matrix, s: f64) -> Matrix {
        self.zip_map(other, |a, b| a + s * b)
    }

    pub fn hadamard(&self, other: &Matrix) -> Matrix {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn sum_squares(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.sum_squares().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Root-mean-square of all entries.
    pub fn rms(&self) -> f64 {
        (self.sum_squares() / self.data.len() as f64).sqrt()
    }

    /// Largest singular value by power iteration on `AᵀA`.
    ///
    /// Converges to relative change `tol` or stops after `max_iters`.
    pub fn spectral_norm(&self, tol: f64, max_iters: usize) -> f64 {
        let n = self.cols;
        // Deterministic, generic start vector.
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.01 * (i % 7) as f64).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        let mut sigma = 0.0;
        for _ in 0..max_iters {
            let av: Vec<f64> = (0..self.rows)
                .map(|r| self.row(r).iter().zip(&v).map(|(a, b)| a * b).sum())
                .collect();
            let mut atav = vec![0.0; n];
            for (r, &s) in av.iter().enumerate() {
                for (o, &a) in atav.iter_mut().zip(self.row(r)) {
                    *o += a * s;
                }
            }
            let norm = atav.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            let next = norm.sqrt();
            v = atav.into_iter().map(|x| x / norm).collect();
            let done = (next - sigma).abs() <= tol * next;
            sigma = next;
            if done {
                break;
            }
        }
        sigma
    }
}

/// `out = lhs · rows` with `rows` a row-major `lhs.cols × n` block, walked
/// in cache-sized panels of rows.
fn accumulate_blocked(out: &mut [f64], lhs: &Matrix, rows: &[f64], n: usize) {
    const PANEL: usize = 32;
    let k = lhs.cols;
    for p0 in (0..k).step_by(PANEL) {
        let p1 = (p0 + PANEL).min(k);
        for i in 0..lhs.rows {
            axpy_rows(&mut out[i * n..(i + 1) * n], &lhs.row(i)[p0..p1], &rows[p0 * n..p1 * n], n);
        }
    }
}

/// Dot product with eight interleaved partial sums, combined in a fixed
/// order so results are deterministic.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

/// `out += Σ_p coeffs[p] · rows[p]` where `rows` holds `coeffs.len()`
/// contiguous rows of width `n`. Rows are consumed four at a time in a
/// fixed order, so results are deterministic.
fn axpy_rows(out: &mut [f64], coeffs: &[f64], rows: &[f64], n: usize) {
    let mut chunks = coeffs.chunks_exact(4);
    let mut p = 0;
    for c in &mut chunks {
        let r0 = &rows[p * n..(p + 1) * n];
        let r1 = &rows[(p + 1) * n..(p + 2) * n];
        let r2 = &rows[(p + 2) * n..(p + 3) * n];
        let r3 = &rows[(p + 3) * n..(p + 4) * n];
        for j in 0..n {
            out[j] += (c[0] * r0[j] + c[1] * r1[j]) + (c[2] * r2[j] + c[3] * r3[j]);
        }
        p += 4;
    }
    for &a in chunks.remainder() {
        let r = &rows[p * n..(p + 1) * n];
        for (o, &b) in out.iter_mut().zip(r) {
            *o += a * b;
        }
        p += 1;
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_bad_construction() {
        assert!(Matrix::new(0, 3, vec![]).is_err());
        assert!(Matrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(matches!(
            Matrix::new(1, 2, vec![1.0, f64::NAN]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn products_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = Matrix::random_normal(5, 7, 1.0, &mut rng);
        let b = Matrix::random_normal(7, 4, 1.0, &mut rng);
        let c = Matrix::random_normal(5, 4, 1.0, &mut rng);
        let direct = a.matmul(&b);
        let naive = Matrix::from_fn(5, 4, |i, j| (0..7).map(|p| a[(i, p)] * b[(p, j)]).sum());
        assert!(direct.sub(&naive).max_abs() < 1e-12);
        assert!(a.matmul_tn(&c).sub(&a.transpose().matmul(&c)).max_abs() < 1e-12);
        assert!(a.matmul_nt(&a).sub(&a.matmul(&a.transpose())).max_abs() < 1e-12);
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        let d = Matrix::diag(3, 4, &[2.0, -5.0, 1.0]);
        assert!((d.spectral_norm(1e-14, 1000) - 5.0).abs() < 1e-9);
        assert_eq!(Matrix::identity(6).spectral_norm(1e-14, 100), 1.0);
    }
}
