use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{check_len, Error, Result};

/// Row-major dense matrix.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(nrows: usize, ncols: usize, data: Vec<f64>) -> Result<Self> {
        check_len("DenseMatrix::from_row_major", nrows * ncols, data.len())?;
        Ok(Self { nrows, ncols, data })
    }

    /// Builds a matrix from nested rows; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(nrows * ncols);
        for row in rows {
            check_len("DenseMatrix::from_rows", ncols, row.len())?;
            data.extend_from_slice(row);
        }
        Ok(Self { nrows, ncols, data })
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(nrows: usize, cols: &[Vec<f64>]) -> Result<Self> {
        let ncols = cols.len();
        let mut m = Self::zeros(nrows, ncols);
        for (j, col) in cols.iter().enumerate() {
            check_len("DenseMatrix::from_columns", nrows, col.len())?;
            for (i, v) in col.iter().enumerate() {
                m.data[i * ncols + j] = *v;
            }
        }
        Ok(m)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nrows, self.ncols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    /// Row `k` and a mutable row `i`, `k < i`.
    pub(crate) fn split_rows(&mut self, k: usize, i: usize) -> (&[f64], &mut [f64]) {
        debug_assert!(k < i && i < self.nrows);
        let n = self.ncols;
        let (head, tail) = self.data.split_at_mut(i * n);
        (&head[k * n..(k + 1) * n], &mut tail[..n])
    }

    pub(crate) fn swap_rows(&mut self, a: usize, b: usize) {
        if a != b {
            let (lo, hi) = (a.min(b), a.max(b));
            let n = self.ncols;
            let (head, tail) = self.data.split_at_mut(hi * n);
            head[lo * n..(lo + 1) * n].swap_with_slice(&mut tail[..n]);
        }
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.nrows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.ncols, self.nrows);
        for i in 0..self.nrows {
            for j in 0..self.ncols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("DenseMatrix::matvec", self.ncols, x.len())?;
        Ok((0..self.nrows).map(|i| super::dot(self.row(i), x)).collect())
    }

    /// `self^T x`
    pub fn tr_matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("DenseMatrix::tr_matvec", self.nrows, x.len())?;
        let mut out = vec![0.0; self.ncols];
        for (i, xi) in x.iter().enumerate() {
            super::axpy(*xi, self.row(i), &mut out);
        }
        Ok(out)
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.ncols != other.nrows {
            return Err(Error::DimensionMismatch {
                context: "DenseMatrix::matmul",
                expected: self.ncols,
                found: other.nrows,
            });
        }
        let mut out = Self::zeros(self.nrows, other.ncols);
        for i in 0..self.nrows {
            for k in 0..self.ncols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.ncols..(i + 1) * other.ncols];
                super::axpy(a, orow, dst);
            }
        }
        Ok(out)
    }

    /// `AᵀA`, skipping the leading zeros of each row (cheap for Hessenberg
    /// and triangular input).
    pub fn gram(&self) -> DenseMatrix {
        let n = self.ncols;
        let mut out = Self::zeros(n, n);
        for k in 0..self.nrows {
            let row = self.row(k);
            let Some(first) = row.iter().position(|&v| v != 0.0) else {
                continue;
            };
            for i in first..n {
                let a = row[i];
                if a != 0.0 {
                    super::axpy(a, &row[i..], &mut out.data[i * n + i..(i + 1) * n]);
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                out.data[i * n + j] = out.data[j * n + i];
            }
        }
        out
    }

    /// Entrywise `self - other`.
    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch {
                context: "DenseMatrix::sub",
                expected: self.nrows * self.ncols,
                found: other.nrows * other.ncols,
            });
        }
        Ok(Self {
            nrows: self.nrows,
            ncols: self.ncols,
            data: super::sub(&self.data, &other.data),
        })
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn norm_frobenius(&self) -> f64 {
        super::norm2(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        super::norm_inf(&self.data)
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.nrows && j < self.ncols);
        &self.data[i * self.ncols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.nrows && j < self.ncols);
        &mut self.data[i * self.ncols + j]
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.nrows, self.ncols)?;
        for i in 0..self.nrows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_and_transpose() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        let at = a.transpose();
        let g = at.matmul(&a).unwrap();
        assert_eq!(g.as_slice(), &[35.0, 44.0, 44.0, 56.0]);
        assert_eq!(a.tr_matvec(&[1.0, 1.0, 1.0]).unwrap(), vec![9.0, 12.0]);
    }

    #[test]
    fn gram_matches_matmul() {
        let h = DenseMatrix::from_rows(&[
            vec![1.0, -2.0, 0.5],
            vec![3.0, 0.25, 1.0],
            vec![0.0, 4.0, -1.5],
            vec![0.0, 0.0, 2.0],
        ])
        .unwrap();
        assert_eq!(h.gram(), h.transpose().matmul(&h).unwrap());
        let z = DenseMatrix::zeros(2, 3);
        assert_eq!(z.gram(), DenseMatrix::zeros(3, 3));
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(DenseMatrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }
}
