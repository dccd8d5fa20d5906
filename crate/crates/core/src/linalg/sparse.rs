use crate::error::{check_len, Error, Result};

use super::{compensated_sum, DenseMatrix};

/// Compressed-sparse-row real matrix.
///
/// Column indices are strictly increasing within each row, so there are no
/// structural duplicates. Explicit zeros are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Validates raw CSR arrays.
    pub fn new(nrows: usize, ncols: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if row_ptr.len() != nrows + 1 {
            return Err(Error::InvalidStructure(format!(
                "row_ptr has length {}, expected {}",
                row_ptr.len(),
                nrows + 1
            )));
        }
        if row_ptr[0] != 0 || row_ptr[nrows] != col_idx.len() || col_idx.len() != values.len() {
            return Err(Error::InvalidStructure(
                "row_ptr bounds disagree with col_idx/values lengths".into(),
            ));
        }
        for i in 0..nrows {
            if row_ptr[i] > row_ptr[i + 1] {
                return Err(Error::InvalidStructure(format!("row_ptr decreases at row {i}")));
            }
            let cols = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            for (k, &c) in cols.iter().enumerate() {
                if c >= ncols {
                    return Err(Error::InvalidStructure(format!("column {c} out of bounds in row {i}")));
                }
                if k > 0 && cols[k - 1] >= c {
                    return Err(Error::InvalidStructure(format!(
                        "columns not strictly increasing in row {i}"
                    )));
                }
            }
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    /// Converts a dense matrix, dropping exact zeros.
    pub fn from_dense(a: &DenseMatrix) -> Self {
        let mut b = TripletBuilder::new(a.nrows(), a.ncols());
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                let v = a[(i, j)];
                if v != 0.0 {
                    b.push(i, j, v);
                }
            }
        }
        b.build()
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    /// Iterates over stored entries as `(row, col, value)`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("SparseMatrix::spmv", self.ncols, x.len())?;
        let mut y = vec![0.0; self.nrows];
        self.spmv_into(x, &mut y);
        Ok(y)
    }

    /// `y = A x` without dimension checks beyond debug assertions.
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
    }

    /// `A^T x`
    pub fn tr_spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("SparseMatrix::tr_spmv", self.nrows, x.len())?;
        let mut y = vec![0.0; self.ncols];
        for (i, xi) in x.iter().enumerate() {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.col_idx[k]] += self.values[k] * xi;
            }
        }
        Ok(y)
    }

    /// `x^T A x`
    pub fn quadratic_form(&self, x: &[f64]) -> Result<f64> {
        check_len("SparseMatrix::quadratic_form", self.ncols, x.len())?;
        check_len("SparseMatrix::quadratic_form", self.nrows, x.len())?;
        Ok(compensated_sum(self.quadratic_terms(x)))
    }

    /// The row terms `x_i (Ax)_i` of `xᵀAx`.
    pub(crate) fn quadratic_terms<'a>(&'a self, x: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
        x.iter().enumerate().map(move |(i, xi)| {
            let row: f64 = (self.row_ptr[i]..self.row_ptr[i + 1])
                .map(|k| self.values[k] * x[self.col_idx[k]])
                .sum();
            xi * row
        })
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &j in &self.col_idx {
            counts[j + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                let dst = next[j];
                col_idx[dst] = i;
                values[dst] = self.values[k];
                next[j] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Reverse Cuthill-McKee ordering of the pattern of `A + Aᵀ`, as
    /// `perm[new] = old`. Reduces the bandwidth, and so the fill of an LU.
    pub fn reverse_cuthill_mckee(&self) -> Vec<usize> {
        let n = self.nrows;
        let t = self.transpose();
        let mut adj: Vec<Vec<usize>> = (0..n)
            .map(|i| {
                let mut nb: Vec<usize> = self
                    .row(i)
                    .0
                    .iter()
                    .chain(t.row(i).0)
                    .copied()
                    .filter(|&j| j != i)
                    .collect();
                nb.sort_unstable();
                nb.dedup();
                nb
            })
            .collect();
        for nb in &mut adj {
            nb.sort_by_key(|&j| self.row_ptr[j + 1] - self.row_ptr[j]);
        }
        let degree = |i: usize| adj[i].len();
        let mut order = Vec::with_capacity(n);
        let mut seen = vec![false; n];
        let mut starts: Vec<usize> = (0..n).collect();
        starts.sort_by_key(|&i| degree(i));
        for &s in &starts {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let first = order.len();
            order.push(s);
            let mut head = first;
            while head < order.len() {
                let v = order[head];
                head += 1;
                let mut next: Vec<usize> = adj[v].iter().copied().filter(|&j| !seen[j]).collect();
                next.sort_by_key(|&j| degree(j));
                for j in next {
                    seen[j] = true;
                    order.push(j);
                }
            }
        }
        order.reverse();
        order
    }

    /// `B[i][j] = A[perm[i]][perm[j]]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_len("SparseMatrix::permuted (square)", self.nrows, self.ncols)?;
        check_len("SparseMatrix::permuted", self.nrows, perm.len())?;
        let mut inv = vec![usize::MAX; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            if old >= perm.len() || inv[old] != usize::MAX {
                return Err(Error::InvalidArgument("not a permutation".into()));
            }
            inv[old] = new;
        }
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        let mut col_idx = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        row_ptr.push(0);
        let mut entries: Vec<(usize, f64)> = Vec::new();
        for &old in perm {
            let (cols, vals) = self.row(old);
            entries.clear();
            entries.extend(cols.iter().zip(vals).map(|(&j, &v)| (inv[j], v)));
            entries.sort_unstable_by_key(|e| e.0);
            for &(j, v) in &entries {
                col_idx.push(j);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            d[(i, j)] += v;
        }
        d
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= alpha;
        }
        out
    }

    /// `alpha * self + beta * other`
    pub fn linear_combination(&self, alpha: f64, other: &SparseMatrix, beta: f64) -> Result<Self> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::DimensionMismatch {
                context: "SparseMatrix::linear_combination",
                expected: self.nrows * self.ncols,
                found: other.nrows * other.ncols,
            });
        }
        let mut b = TripletBuilder::new(self.nrows, self.ncols);
        b.add_matrix(0, 0, self, alpha);
        b.add_matrix(0, 0, other, beta);
        Ok(b.build())
    }

    /// `(A + A^T) / 2`
    pub fn symmetric_part(&self) -> Result<Self> {
        if self.nrows != self.ncols {
            return Err(Error::DimensionMismatch {
                context: "SparseMatrix::symmetric_part",
                expected: self.nrows,
                found: self.ncols,
            });
        }
        self.linear_combination(0.5, &self.transpose(), 0.5)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.nrows == self.ncols
            && self.triplets().all(|(i, j, v)| (v - self.get(j, i)).abs() <= tol)
            && self
                .transpose()
                .triplets()
                .all(|(i, j, v)| (v - self.get(i, j)).abs() <= tol)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Kronecker product `small ⊗ self`, i.e. block `(p, q)` is `small[p, q] * self`.
    pub fn kron_left(&self, small: &DenseMatrix) -> Self {
        let (sr, sc) = small.shape();
        let mut b = TripletBuilder::new(sr * self.nrows, sc * self.ncols);
        for p in 0..sr {
            for q in 0..sc {
                let w = small[(p, q)];
                if w != 0.0 {
                    b.add_matrix(p * self.nrows, q * self.ncols, self, w);
                }
            }
        }
        b.build()
    }
}

/// Coordinate-format accumulator; duplicates are summed on [`build`](Self::build).
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::with_capacity(cap),
        }
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        assert!(
            i < self.nrows && j < self.ncols,
            "triplet ({i}, {j}) outside {}x{}",
            self.nrows,
            self.ncols
        );
        self.entries.push((i, j, v));
    }

    /// Adds `scale * m` with its top-left corner at `(row_off, col_off)`.
    pub fn add_matrix(&mut self, row_off: usize, col_off: usize, m: &SparseMatrix, scale: f64) {
        for (i, j, v) in m.triplets() {
            self.push(row_off + i, col_off + j, scale * v);
        }
    }

    pub fn build(mut self) -> SparseMatrix {
        self.entries.sort_by_key(|e| (e.0, e.1));
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut col_idx: Vec<usize> = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in self.entries {
            if last == Some((i, j)) {
                *values.last_mut().expect("entry exists") += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..self.nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        }
    }
}
