//! Quadratic constraints `xᵀMx + vᵀx + c = 0`, their reduction onto a
//! Krylov space `x = x0 + Z y`, and lifting through a stage reconstruction.

use crate::error::{check_len, Error, Result};
use crate::linalg::{compensated_sum, dot, norm2, DenseMatrix, SparseMatrix};

/// A quadratic functional `xᵀMx + vᵀx + c` whose zero set is imposed.
///
/// `M` is stored symmetrised; for a quadratic form this changes nothing,
/// but it makes the gradient `2Mx + v` exact.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticConstraint {
    m: SparseMatrix,
    v: Vec<f64>,
    c: f64,
    label: String,
    m_norm: f64,
}

impl QuadraticConstraint {
    pub fn new(m: &SparseMatrix, v: Vec<f64>, c: f64, label: impl Into<String>) -> Result<Self> {
        check_len("QuadraticConstraint::new (square M)", m.nrows(), m.ncols())?;
        check_len("QuadraticConstraint::new (v)", m.nrows(), v.len())?;
        let m = if m.is_symmetric(0.0) {
            m.clone()
        } else {
            m.symmetric_part()?
        };
        Ok(Self {
            m_norm: m.norm_inf(),
            m,
            v,
            c,
            label: label.into(),
        })
    }

    /// `vᵀx + c`.
    pub fn linear(v: Vec<f64>, c: f64, label: impl Into<String>) -> Self {
        let n = v.len();
        Self {
            m: SparseMatrix::zeros(n, n),
            v,
            c,
            label: label.into(),
            m_norm: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    pub fn m(&self) -> &SparseMatrix {
        &self.m
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_linear(&self) -> bool {
        self.m.nnz() == 0
    }

    /// Same functional with the constant replaced.
    pub fn with_constant(&self, c: f64) -> Self {
        Self { c, ..self.clone() }
    }

    /// The misfit `xᵀMx + vᵀx + c`.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        check_len("QuadraticConstraint::evaluate", self.dim(), x.len())?;
        Ok(self.evaluate_unchecked(x))
    }

    pub(crate) fn evaluate_unchecked(&self, x: &[f64]) -> f64 {
        if self.is_linear() {
            return self.value_from(x, None);
        }
        let mx = self.m.spmv(x).expect("dimension checked");
        self.value_from(x, Some(&mx))
    }

    /// `xᵀ(Mx + v) + c` given `Mx`, summed with compensation so that
    /// conservation can be measured below the rounding of a naive sum.
    fn value_from(&self, x: &[f64], mx: Option<&[f64]>) -> f64 {
        let terms = x
            .iter()
            .zip(&self.v)
            .enumerate()
            .map(|(i, (x, v))| x * (mx.map_or(0.0, |m| m[i]) + v));
        compensated_sum(terms.chain([self.c]))
    }

    /// `xᵀMx + vᵀx` without the constant.
    pub fn functional(&self, x: &[f64]) -> Result<f64> {
        Ok(self.evaluate(x)? - self.c)
    }

    /// `2Mx + v`.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("QuadraticConstraint::gradient", self.dim(), x.len())?;
        let mut g = self.v.clone();
        if !self.is_linear() {
            let mx = self.m.spmv(x)?;
            for (gi, mi) in g.iter_mut().zip(mx) {
                *gi += 2.0 * mi;
            }
        }
        Ok(g)
    }

    /// The constraint on stacked stage values `x = [x¹; …; xˢ]` obtained by
    /// substituting `z_n + dt Σ bᵢ xⁱ`.
    pub fn lift_through_affine(&self, z_n: &[f64], dt: f64, b: &[f64]) -> Result<Self> {
        let d = self.dim();
        check_len("lift_through_affine (z_n)", d, z_n.len())?;
        if b.is_empty() {
            return Err(Error::InvalidArgument("lift needs at least one stage".into()));
        }
        let s = b.len();
        let m = if self.is_linear() {
            SparseMatrix::zeros(s * d, s * d)
        } else {
            let mut bb = DenseMatrix::zeros(s, s);
            for p in 0..s {
                for q in 0..s {
                    bb[(p, q)] = (dt * b[p]) * (dt * b[q]);
                }
            }
            self.m.kron_left(&bb)
        };
        let grad = self.gradient(z_n)?;
        let mut v = Vec::with_capacity(s * d);
        for &bi in b {
            v.extend(grad.iter().map(|g| dt * bi * g));
        }
        let c = self.evaluate(z_n)?;
        Ok(Self {
            m_norm: m.norm_inf(),
            m,
            v,
            c,
            label: self.label.clone(),
        })
    }
}

/// A constraint expressed in Krylov coordinates:
/// `yᵀGy + gᵀy + g0` equals the full constraint at `x0 + Z y`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedConstraint {
    pub g_mat: DenseMatrix,
    pub g: Vec<f64>,
    pub g0: f64,
    /// Magnitude of the full-space terms summed into `g0`, which bounds
    /// its rounding error.
    pub g0_scale: f64,
}

impl ReducedConstraint {
    pub fn new(g_mat: DenseMatrix, g: Vec<f64>, g0: f64) -> Result<Self> {
        check_len("ReducedConstraint::new (square G)", g_mat.nrows(), g_mat.ncols())?;
        check_len("ReducedConstraint::new (g)", g_mat.nrows(), g.len())?;
        Ok(Self {
            g_mat,
            g,
            g0,
            g0_scale: g0.abs(),
        })
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    pub fn evaluate(&self, y: &[f64]) -> Result<f64> {
        check_len("ReducedConstraint::evaluate", self.dim(), y.len())?;
        Ok(self.evaluate_unchecked(y))
    }

    pub(crate) fn evaluate_unchecked(&self, y: &[f64]) -> f64 {
        self.quadratic_term(y) + dot(&self.g, y) + self.g0
    }

    fn quadratic_term(&self, y: &[f64]) -> f64 {
        let gy = self.g_mat.matvec(y).expect("dimension checked");
        dot(y, &gy)
    }

    /// `2Gy + g`.
    pub fn jacobian(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len("ReducedConstraint::jacobian", self.dim(), y.len())?;
        let mut j = self.g_mat.matvec(y)?;
        for (ji, gi) in j.iter_mut().zip(&self.g) {
            *ji = 2.0 * *ji + gi;
        }
        Ok(j)
    }

    /// Sum of the magnitudes of the three terms at `y`, counting `g0` by
    /// the size of its parts.
    pub fn term_scale(&self, y: &[f64]) -> f64 {
        self.quadratic_term(y).abs() + dot(&self.g, y).abs() + self.g0_scale.max(self.g0.abs())
    }
}

/// Reduces `constraint` onto `x0 + Z y` in one batch.
pub fn reduce(constraint: &QuadraticConstraint, x0: &[f64], z: &DenseMatrix) -> Result<ReducedConstraint> {
    check_len("reduce (Z rows)", constraint.dim(), z.nrows())?;
    let columns: Vec<Vec<f64>> = (0..z.ncols()).map(|j| z.column(j)).collect();
    let mut r = Reducer::new(constraint, x0)?;
    r.extend(&columns)?;
    Ok(r.into_reduced())
}

/// Incremental reduction: one column of `Z` at a time, each costing one
/// product with `M` and `ℓ` inner products.
#[derive(Debug, Clone)]
pub struct Reducer<'a> {
    constraint: &'a QuadraticConstraint,
    /// `2 M x0 + v`
    lin: Vec<f64>,
    lin_norm: f64,
    m_norm: f64,
    /// largest column norm of `Z` seen so far
    z_norm: f64,
    g_cols: Vec<Vec<f64>>,
    g: Vec<f64>,
    g0: f64,
    g0_scale: f64,
}

impl<'a> Reducer<'a> {
    pub fn new(constraint: &'a QuadraticConstraint, x0: &[f64]) -> Result<Self> {
        check_len("Reducer::new", constraint.dim(), x0.len())?;
        let mx0 = if constraint.is_linear() {
            vec![0.0; x0.len()]
        } else {
            constraint.m.spmv(x0)?
        };
        let g0 = constraint.value_from(x0, Some(&mx0));
        let quad: f64 = x0.iter().zip(&mx0).map(|(x, m)| x * m).sum();
        let g0_scale = quad.abs() + dot(&constraint.v, x0).abs() + constraint.c.abs();
        let lin: Vec<f64> = constraint.v.iter().zip(&mx0).map(|(v, m)| v + 2.0 * m).collect();
        Ok(Self {
            constraint,
            lin_norm: norm2(&lin),
            m_norm: constraint.m_norm,
            z_norm: 0.0,
            lin,
            g_cols: Vec::new(),
            g: Vec::new(),
            g0,
            g0_scale,
        })
    }

    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }

    /// Adds the next column, `columns[self.len()]`; `columns` holds the
    /// whole basis so far.
    pub fn push(&mut self, columns: &[Vec<f64>]) -> Result<()> {
        let k = self.len();
        let Some(zk) = columns.get(k) else {
            return Err(Error::InvalidArgument(format!(
                "reducer has {k} columns but basis only {}",
                columns.len()
            )));
        };
        check_len("Reducer::push", self.constraint.dim(), zk.len())?;
        let mut col = vec![0.0; k + 1];
        if !self.constraint.is_linear() {
            let mz = self.constraint.m.spmv(zk)?;
            for (i, zi) in columns[..=k].iter().enumerate() {
                col[i] = dot(zi, &mz);
            }
        }
        self.g.push(dot(&self.lin, zk));
        self.g_cols.push(col);
        self.z_norm = self.z_norm.max(norm2(zk));
        Ok(())
    }

    /// Whether the constraint is constant on `x0 + span(Z)` up to rounding:
    /// every reduced coefficient is below `rtol` times what the full-space
    /// gradient and `M` could produce from columns of this size.
    pub fn is_constant(&self, rtol: f64) -> bool {
        let lin_bound = rtol * self.lin_norm * self.z_norm;
        let quad_bound = rtol * self.m_norm * self.z_norm * self.z_norm;
        self.g.iter().all(|v| v.abs() <= lin_bound) && self.g_cols.iter().flatten().all(|v| v.abs() <= quad_bound)
    }

    /// Pushes columns until every column of `columns` is included.
    pub fn extend(&mut self, columns: &[Vec<f64>]) -> Result<()> {
        while self.len() < columns.len() {
            self.push(columns)?;
        }
        Ok(())
    }

    pub fn reduced(&self) -> ReducedConstraint {
        let l = self.len();
        let mut gm = DenseMatrix::zeros(l, l);
        for (j, col) in self.g_cols.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                gm[(i, j)] = v;
                gm[(j, i)] = v;
            }
        }
        ReducedConstraint {
            g_mat: gm,
            g: self.g.clone(),
            g0: self.g0,
            g0_scale: self.g0_scale,
        }
    }

    fn into_reduced(self) -> ReducedConstraint {
        self.reduced()
    }
}
