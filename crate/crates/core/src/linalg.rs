//! Small dense matrices. Networks here have at most a few thousand agents, so
//! a row-major `Vec<f64>` is all that is needed.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (o, v) in out.iter_mut().zip(self.row(i)) {
                *o += v;
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn transpose_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, xi) in x.iter().enumerate().take(self.rows) {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * xi;
            }
        }
        out
    }

    /// Returns `self - c * 1 1^T`.
    pub fn minus_constant(&self, c: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v - c).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| f64::max(m, v.abs()))
    }
}

/// Largest singular value by power iteration on `AᵀA`.
///
/// Stops when the Rayleigh quotient changes by less than `tol` (relative to
/// `max(1, σ²)`) or after `max_iter` sweeps.
pub fn spectral_norm(a: &Matrix, tol: f64, max_iter: usize) -> f64 {
    let n = a.cols();
    if n == 0 || a.max_abs() == 0.0 {
        return 0.0;
    }
    // Fixed, non-symmetric start vector; deterministic and unlikely to be
    // orthogonal to the dominant singular vector.
    let mut v: Vec<f64> = (0..n)
        .map(|i| {
            let t = (i as f64 + 1.0) * 0.618_033_988_749_895;
            (t - math::floor(t)) - 0.5 + 1e-3 * (i as f64 + 1.0)
        })
        .collect();
    let mut nv = math::norm(&v);
    if nv == 0.0 {
        v[0] = 1.0;
        nv = 1.0;
    }
    v.iter_mut().for_each(|x| *x /= nv);

    let mut prev = 0.0;
    for _ in 0..max_iter {
        let av = a.mul_vec(&v);
        let mut w = a.transpose_mul_vec(&av);
        let rq: f64 = w.iter().zip(&v).map(|(x, y)| x * y).sum();
        let nw = math::norm(&w);
        if nw == 0.0 {
            return 0.0;
        }
        w.iter_mut().for_each(|x| *x /= nw);
        v = w;
        if (rq - prev).abs() <= tol * f64::max(1.0, rq) {
            return math::sqrt(rq.max(0.0));
        }
        prev = rq;
    }
    math::sqrt(prev.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_norm_of_diagonal() {
        let m = Matrix::from_rows(&[vec![0.5, 0.0], vec![0.0, -0.9]]);
        assert!((spectral_norm(&m, 1e-14, 10_000) - 0.9).abs() < 1e-9);
    }

    #[test]
    fn spectral_norm_of_rank_one() {
        // u vᵀ with |u| = 5, |v| = sqrt(2)
        let m = Matrix::from_rows(&[vec![3.0, 3.0], vec![4.0, 4.0]]);
        let want = 5.0 * math::sqrt(2.0);
        assert!((spectral_norm(&m, 1e-14, 10_000) - want).abs() < 1e-9);
    }

    #[test]
    fn zero_matrix() {
        assert_eq!(spectral_norm(&Matrix::zeros(3, 3), 1e-10, 100), 0.0);
    }
}
