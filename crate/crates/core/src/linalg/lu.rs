use crate::error::{check_len, Error, Result};

use super::DenseMatrix;

/// Pivots smaller than this multiple of `max |a_ij|` are treated as zero.
pub const SINGULAR_PIVOT_RTOL: f64 = 1e-14;

/// Dense LU factorisation with partial (row) pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct LuFactor {
    n: usize,
    lu: DenseMatrix,
    perm: Vec<usize>,
}

impl LuFactor {
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        let (n, m) = a.shape();
        check_len("LuFactor::new (square)", n, m)?;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.max_abs();
        let threshold = SINGULAR_PIVOT_RTOL * scale;

        for k in 0..n {
            let (p, pmax) =
                (k..n)
                    .map(|i| (i, lu[(i, k)].abs()))
                    .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pmax > threshold) {
                return Err(Error::SingularMatrix { column: k, pivot: pmax });
            }
            if p != k {
                perm.swap(p, k);
                lu.swap_rows(p, k);
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let (row_k, row_i) = lu.split_rows(k, i);
                let f = row_i[k] / pivot;
                row_i[k] = f;
                if f != 0.0 {
                    for (x, u) in row_i[k + 1..].iter_mut().zip(&row_k[k + 1..]) {
                        *x -= f * u;
                    }
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_len("LuFactor::solve", self.n, b.len())?;
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            let s: f64 = (0..i).map(|j| row[j] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let s: f64 = (i + 1..n).map(|j| row[j] * x[j]).sum();
            x[i] = (x[i] - s) / row[i];
        }
        Ok(x)
    }
}

/// Solves `A x = b` by LU with partial pivoting.
pub fn dense_lu_solve(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    check_len("dense_lu_solve", a.nrows(), b.len())?;
    LuFactor::new(a)?.solve(b)
}
