//! Right preconditioners for the flexible Krylov drivers.
//!
//! All shipped preconditioners are fixed linear maps once constructed.
//! [`Ilut`] with `drop_tol = 0` and unbounded fill is an exact sparse LU
//! (without pivoting) and doubles as a direct solver.

use std::collections::BTreeSet;

use crate::error::{check_len, Error, Result};
use crate::linalg::SparseMatrix;

/// Pivots below this multiple of `‖A‖∞` trigger the diagonal shift.
const TINY_PIVOT_RTOL: f64 = 1e-14;
/// Size of the diagonal shift, relative to `‖A‖∞`.
const PIVOT_SHIFT_RTOL: f64 = 1e-10;

/// A linear map `r ↦ P r` approximating `A⁻¹`.
pub trait Preconditioner: Send + Sync {
    fn dim(&self) -> usize;

    /// Writes `P r` into `out`.
    fn apply(&self, r: &[f64], out: &mut [f64]);

    fn name(&self) -> &'static str;
}

#[derive(Debug, Clone)]
pub struct Identity {
    n: usize,
}

impl Identity {
    pub fn new(n: usize) -> Self {
        Self { n }
    }
}

impl Preconditioner for Identity {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, r: &[f64], out: &mut [f64]) {
        out.copy_from_slice(r);
    }

    fn name(&self) -> &'static str {
        "identity"
    }
}

/// Diagonal scaling `x / diag(A)`.
#[derive(Debug, Clone)]
pub struct Jacobi {
    inv_diag: Vec<f64>,
}

impl Jacobi {
    pub fn new(a: &SparseMatrix) -> Result<Self> {
        check_len("Jacobi::new (square)", a.nrows(), a.ncols())?;
        let inv_diag = a
            .diagonal()
            .into_iter()
            .enumerate()
            .map(|(i, d)| {
                if d == 0.0 || !d.is_finite() {
                    Err(Error::FactorisationFailure { row: i, pivot: d })
                } else {
                    Ok(1.0 / d)
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(Self { inv_diag })
    }
}

impl Preconditioner for Jacobi {
    fn dim(&self) -> usize {
        self.inv_diag.len()
    }

    fn apply(&self, r: &[f64], out: &mut [f64]) {
        for ((o, ri), d) in out.iter_mut().zip(r).zip(&self.inv_diag) {
            *o = ri * d;
        }
    }

    fn name(&self) -> &'static str {
        "jacobi"
    }
}

/// Row-wise threshold incomplete LU (ILUT) without pivoting.
///
/// Row `i` of `L + U` keeps the diagonal plus at most
/// `fill_factor * nnz(A_i) - 1` off-diagonal entries, chosen by magnitude
/// after dropping everything below `drop_tol * ‖A_i‖₂`.
#[derive(Debug, Clone)]
pub struct Ilut {
    n: usize,
    l_ptr: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    u_ptr: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    shifted_pivots: usize,
}

impl Ilut {
    pub fn new(a: &SparseMatrix, drop_tol: f64, fill_factor: f64) -> Result<Self> {
        let n = a.nrows();
        check_len("Ilut::new (square)", n, a.ncols())?;
        if !(drop_tol >= 0.0) || !(fill_factor >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "ILUT needs drop_tol >= 0 and fill_factor >= 1 (got {drop_tol}, {fill_factor})"
            )));
        }
        let a_norm = a.norm_inf();
        let tiny = TINY_PIVOT_RTOL * a_norm;

        let mut l_ptr = vec![0];
        let mut l_idx = Vec::new();
        let mut l_val = Vec::new();
        let mut u_ptr = vec![0];
        let mut u_idx: Vec<usize> = Vec::new();
        let mut u_val: Vec<f64> = Vec::new();
        // position of the diagonal entry of each U row
        let mut u_diag: Vec<usize> = Vec::with_capacity(n);
        let mut shifted_pivots = 0;

        let mut work = vec![0.0; n];
        let mut in_work = vec![false; n];
        let mut pattern: Vec<usize> = Vec::new();
        let mut lower: BTreeSet<usize> = BTreeSet::new();

        for i in 0..n {
            let (cols, vals) = a.row(i);
            let row_norm = vals.iter().map(|v| v * v).sum::<f64>().sqrt();
            let tau = drop_tol * row_norm;
            for (&j, &v) in cols.iter().zip(vals) {
                work[j] = v;
                in_work[j] = true;
                pattern.push(j);
                if j < i {
                    lower.insert(j);
                }
            }
            if !in_work[i] {
                work[i] = 0.0;
                in_work[i] = true;
                pattern.push(i);
            }

            let mut l_row: Vec<(usize, f64)> = Vec::new();
            while let Some(k) = lower.pop_first() {
                let pivot = u_val[u_diag[k]];
                let factor = work[k] / pivot;
                work[k] = 0.0;
                if factor.abs() < tau || factor == 0.0 {
                    continue;
                }
                l_row.push((k, factor));
                for p in u_diag[k] + 1..u_ptr[k + 1] {
                    let j = u_idx[p];
                    if !in_work[j] {
                        in_work[j] = true;
                        work[j] = 0.0;
                        pattern.push(j);
                        if j < i {
                            lower.insert(j);
                        }
                    }
                    work[j] -= factor * u_val[p];
                }
            }

            let mut diag = work[i];
            let mut upper: Vec<(usize, f64)> = pattern
                .iter()
                .filter(|&&j| j > i && work[j].abs() >= tau && work[j] != 0.0)
                .map(|&j| (j, work[j]))
                .collect();
            for &j in &pattern {
                work[j] = 0.0;
                in_work[j] = false;
            }
            pattern.clear();

            if fill_factor.is_finite() {
                let budget = ((fill_factor * cols.len() as f64).floor() as usize).max(1) - 1;
                if l_row.len() + upper.len() > budget {
                    let mut all: Vec<(bool, usize, f64)> = l_row
                        .iter()
                        .map(|&(j, v)| (true, j, v))
                        .chain(upper.iter().map(|&(j, v)| (false, j, v)))
                        .collect();
                    all.sort_by(|a, b| b.2.abs().total_cmp(&a.2.abs()).then(a.1.cmp(&b.1)));
                    all.truncate(budget);
                    l_row = all.iter().filter(|e| e.0).map(|e| (e.1, e.2)).collect();
                    upper = all.iter().filter(|e| !e.0).map(|e| (e.1, e.2)).collect();
                }
            }
            l_row.sort_by_key(|e| e.0);
            upper.sort_by_key(|e| e.0);

            if !(diag.abs() >= tiny) || diag == 0.0 {
                let sign = if diag < 0.0 { -1.0 } else { 1.0 };
                diag += sign * PIVOT_SHIFT_RTOL * a_norm;
                shifted_pivots += 1;
            }
            if !diag.is_finite() || diag.abs() < TINY_PIVOT_RTOL || diag.abs() < tiny {
                return Err(Error::FactorisationFailure { row: i, pivot: diag });
            }

            for (j, v) in l_row {
                l_idx.push(j);
                l_val.push(v);
            }
            l_ptr.push(l_idx.len());
            u_diag.push(u_idx.len());
            u_idx.push(i);
            u_val.push(diag);
            for (j, v) in upper {
                u_idx.push(j);
                u_val.push(v);
            }
            u_ptr.push(u_idx.len());
        }

        Ok(Self {
            n,
            l_ptr,
            l_idx,
            l_val,
            u_ptr,
            u_idx,
            u_val,
            shifted_pivots,
        })
    }

    /// Complete LU without dropping; an exact direct solver when no pivot
    /// had to be shifted.
    pub fn exact(a: &SparseMatrix) -> Result<Self> {
        Self::new(a, 0.0, f64::INFINITY)
    }

    /// Solves `L U x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_len("Ilut::solve", self.n, b.len())?;
        let mut x = vec![0.0; self.n];
        self.apply(b, &mut x);
        Ok(x)
    }

    pub fn nnz(&self) -> usize {
        self.l_val.len() + self.u_val.len()
    }

    /// Number of rows of `L` (excluding the unit diagonal).
    pub fn l_row_nnz(&self, i: usize) -> usize {
        self.l_ptr[i + 1] - self.l_ptr[i]
    }

    /// Number of rows of `U` (including the diagonal).
    pub fn u_row_nnz(&self, i: usize) -> usize {
        self.u_ptr[i + 1] - self.u_ptr[i]
    }

    pub fn shifted_pivots(&self) -> usize {
        self.shifted_pivots
    }
}

impl Preconditioner for Ilut {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, r: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let mut acc = r[i];
            for p in self.l_ptr[i]..self.l_ptr[i + 1] {
                acc -= self.l_val[p] * out[self.l_idx[p]];
            }
            out[i] = acc;
        }
        for i in (0..self.n).rev() {
            let start = self.u_ptr[i];
            let mut acc = out[i];
            for p in start + 1..self.u_ptr[i + 1] {
                acc -= self.u_val[p] * out[self.u_idx[p]];
            }
            out[i] = acc / self.u_val[start];
        }
    }

    fn name(&self) -> &'static str {
        "ilut"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dense_lu_solve, norm2, sub, DenseMatrix, TripletBuilder};

    fn laplacian_1d(n: usize) -> SparseMatrix {
        let mut b = TripletBuilder::new(n, n);
        for i in 0..n {
            b.push(i, i, 2.0);
            if i > 0 {
                b.push(i, i - 1, -1.0);
            }
            if i + 1 < n {
                b.push(i, i + 1, -1.0);
            }
        }
        b.build()
    }

    #[test]
    fn diagonal_matrix_is_inverted_exactly() {
        let a = SparseMatrix::from_diagonal(&[2.0, 4.0, -0.5]);
        let p = Ilut::new(&a, 1e-4, 10.0).unwrap();
        let mut out = vec![0.0; 3];
        p.apply(&[2.0, 4.0, 1.0], &mut out);
        assert_eq!(out, vec![1.0, 1.0, -2.0]);
    }

    #[test]
    fn jacobi_examples() {
        let p = Jacobi::new(&SparseMatrix::identity(3)).unwrap();
        let mut out = vec![0.0; 3];
        p.apply(&[1.0, 2.0, 3.0], &mut out);
        assert_eq!(out, vec![1.0, 2.0, 3.0]);

        let p = Jacobi::new(&SparseMatrix::from_diagonal(&[2.0, 4.0])).unwrap();
        let mut out = vec![0.0; 2];
        p.apply(&[2.0, 4.0], &mut out);
        assert_eq!(out, vec![1.0, 1.0]);

        let z = SparseMatrix::from_diagonal(&[1.0, 0.0]);
        assert!(matches!(
            Jacobi::new(&z),
            Err(Error::FactorisationFailure { row: 1, .. })
        ));
    }

    #[test]
    fn exact_ilut_matches_dense_lu() {
        let dense = DenseMatrix::from_rows(&[
            vec![4.0, -1.0, 0.0, 0.5, 0.0],
            vec![-1.0, 4.0, -1.0, 0.0, 0.2],
            vec![0.3, -1.0, 4.0, -1.0, 0.0],
            vec![0.0, 0.7, -1.0, 4.0, -1.0],
            vec![1.0, 0.0, 0.0, -1.0, 4.0],
        ])
        .unwrap();
        let a = SparseMatrix::from_dense(&dense);
        let p = Ilut::exact(&a).unwrap();
        assert_eq!(p.shifted_pivots(), 0);
        let x_true = [1.0, -2.0, 0.5, 3.0, -1.5];
        let b = a.spmv(&x_true).unwrap();
        let x = p.solve(&b).unwrap();
        let oracle = dense_lu_solve(&dense, &b).unwrap();
        assert!(norm2(&sub(&x, &x_true)) < 1e-12);
        assert!(norm2(&sub(&x, &oracle)) < 1e-12);
    }

    #[test]
    fn fill_is_bounded() {
        let n = 30;
        let mut b = TripletBuilder::new(n, n);
        for i in 0..n {
            b.push(i, i, 10.0);
            b.push(i, (i + 7) % n, 1.0);
            b.push(i, (i * 3 + 1) % n, -1.0);
            b.push((i * 5 + 2) % n, i, 0.5);
        }
        let a = b.build();
        let fill = 2.0;
        let p = Ilut::new(&a, 0.0, fill).unwrap();
        for i in 0..n {
            let budget = (fill * a.row(i).0.len() as f64).floor() as usize;
            assert!(p.l_row_nnz(i) + p.u_row_nnz(i) <= budget.max(1));
        }
    }

    #[test]
    fn zero_matrix_fails() {
        let a = SparseMatrix::zeros(3, 3);
        assert!(matches!(
            Ilut::new(&a, 1e-4, 10.0),
            Err(Error::FactorisationFailure { row: 0, .. })
        ));
    }

    #[test]
    fn zero_pivot_is_shifted() {
        // [[0, 1], [1, 0]] has a zero leading pivot without row exchanges
        let a = SparseMatrix::from_dense(&DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap());
        let p = Ilut::exact(&a).unwrap();
        assert!(p.shifted_pivots() >= 1);
    }

    #[test]
    fn tridiagonal_exact_factor_has_no_fill() {
        let a = laplacian_1d(50);
        let p = Ilut::exact(&a).unwrap();
        assert_eq!(p.nnz(), a.nnz());
    }
}
