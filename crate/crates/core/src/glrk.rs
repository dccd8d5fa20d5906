//! Gauss-Legendre implicit Runge-Kutta methods for linear systems
//! `E ż = F z + g`, possibly with algebraic rows.
//!
//! Stage unknowns are the stage derivatives `kⁱ`, stacked as
//! `[k¹; …; kˢ]`, and the step is `z_{n+1} = z_n + dt Σ bᵢ kⁱ`.

use crate::error::{check_len, Error, Result};
use crate::linalg::{DenseMatrix, SparseMatrix, TripletBuilder};
use crate::quadrature::{bracketed_roots, gauss_legendre, lagrange_basis, legendre};

pub const MAX_STAGES: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    pub s: usize,
    pub a: DenseMatrix,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

/// The `s`-stage Gauss-Legendre tableau (order `2s`).
///
/// Nodes are the roots of the shifted Legendre polynomial `P_s(2x - 1)`;
/// `a_ij = ∫₀^{cᵢ} L_j` and `b_j = ∫₀¹ L_j` are evaluated by `s`-point Gauss
/// quadrature, exact for the degree `s - 1` Lagrange polynomials `L_j`.
pub fn gauss_legendre_tableau(s: usize) -> Result<ButcherTableau> {
    if s == 0 || s > MAX_STAGES {
        return Err(Error::InvalidArgument(format!(
            "stage count must be in 1..={MAX_STAGES}, got {s}"
        )));
    }
    let c = bracketed_roots(
        |x| {
            let (p, dp) = legendre(s, 2.0 * x - 1.0);
            (p, 2.0 * dp)
        },
        0.0,
        1.0,
        s,
    );
    debug_assert_eq!(c.len(), s);
    let (xi, wi) = gauss_legendre(s);

    let integrate = |upper: f64| -> Vec<f64> {
        let mut acc = vec![0.0; s];
        for (x, w) in xi.iter().zip(&wi) {
            let tau = 0.5 * upper * (x + 1.0);
            let l = lagrange_basis(&c, tau);
            for (a, lj) in acc.iter_mut().zip(l) {
                *a += 0.5 * upper * w * lj;
            }
        }
        acc
    };

    let mut a = DenseMatrix::zeros(s, s);
    for i in 0..s {
        for (j, v) in integrate(c[i]).into_iter().enumerate() {
            a[(i, j)] = v;
        }
    }
    // the weights at the nodes are exactly the Gauss weights on [0, 1]
    let b = wi.iter().map(|w| 0.5 * w).collect();
    Ok(ButcherTableau { s, a, b, c })
}

/// The all-stage linear system for one step.
#[derive(Debug, Clone)]
pub struct StageSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    pub stages: usize,
    /// Size of one stage block.
    pub block_dim: usize,
}

impl StageSystem {
    /// Stage `i` of a stacked vector.
    pub fn stage<'v>(&self, x: &'v [f64], i: usize) -> &'v [f64] {
        &x[i * self.block_dim..(i + 1) * self.block_dim]
    }
}

/// Assembles `E kⁱ − F(z_n + dt Σⱼ aᵢⱼ kʲ) = g` for every stage.
pub fn assemble_stage_system(
    e: &SparseMatrix,
    f: &SparseMatrix,
    g: &[f64],
    z_n: &[f64],
    dt: f64,
    tableau: &ButcherTableau,
) -> Result<StageSystem> {
    assemble_stage_system_dae(e, f, g, z_n, dt, tableau, &vec![false; e.nrows()])
}

/// As [`assemble_stage_system`], but rows flagged in `algebraic` (where `E`
/// vanishes) are imposed directly on each stage as `F_r kⁱ = 0`. For a
/// consistent `z_n` this keeps the algebraic relation satisfied by
/// `z_{n+1}`.
pub fn assemble_stage_system_dae(
    e: &SparseMatrix,
    f: &SparseMatrix,
    g: &[f64],
    z_n: &[f64],
    dt: f64,
    tableau: &ButcherTableau,
    algebraic: &[bool],
) -> Result<StageSystem> {
    let d = e.nrows();
    check_len("assemble_stage_system (E square)", d, e.ncols())?;
    check_len("assemble_stage_system (F rows)", d, f.nrows())?;
    check_len("assemble_stage_system (F cols)", d, f.ncols())?;
    check_len("assemble_stage_system (g)", d, g.len())?;
    check_len("assemble_stage_system (z_n)", d, z_n.len())?;
    check_len("assemble_stage_system (row mask)", d, algebraic.len())?;
    for (i, _, v) in e.triplets() {
        if algebraic[i] && v != 0.0 {
            return Err(Error::InvalidStructure(format!(
                "row {i} is flagged algebraic but E has an entry there"
            )));
        }
    }

    let s = tableau.s;
    let mut fz = f.spmv(z_n)?;
    let mut diag = TripletBuilder::new(d, d);
    let mut f_diff = TripletBuilder::new(d, d);
    for (i, j, v) in e.triplets() {
        diag.push(i, j, v);
    }
    for (i, j, v) in f.triplets() {
        if algebraic[i] {
            diag.push(i, j, v);
        } else {
            f_diff.push(i, j, v);
        }
    }
    let diag = diag.build();
    let f_diff = f_diff.build();

    let mut b = TripletBuilder::with_capacity(s * d, s * d, s * diag.nnz() + s * s * f_diff.nnz());
    for i in 0..s {
        b.add_matrix(i * d, i * d, &diag, 1.0);
        for j in 0..s {
            let aij = tableau.a[(i, j)];
            if aij != 0.0 {
                b.add_matrix(i * d, j * d, &f_diff, -dt * aij);
            }
        }
    }
    for (r, v) in fz.iter_mut().enumerate() {
        *v = if algebraic[r] { 0.0 } else { *v + g[r] };
    }
    let mut rhs = Vec::with_capacity(s * d);
    for _ in 0..s {
        rhs.extend_from_slice(&fz);
    }
    Ok(StageSystem {
        matrix: b.build(),
        rhs,
        stages: s,
        block_dim: d,
    })
}

/// `z_n + dt Σ bᵢ xⁱ`.
pub fn reconstruct(z_n: &[f64], dt: f64, tableau: &ButcherTableau, x_stages: &[f64]) -> Result<Vec<f64>> {
    let d = z_n.len();
    check_len("reconstruct", tableau.s * d, x_stages.len())?;
    let mut z = z_n.to_vec();
    for (i, bi) in tableau.b.iter().enumerate() {
        let w = dt * bi;
        for (zk, xk) in z.iter_mut().zip(&x_stages[i * d..(i + 1) * d]) {
            *zk += w * xk;
        }
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense_lu_solve;

    #[test]
    fn midpoint_tableau() {
        let t = gauss_legendre_tableau(1).unwrap();
        assert_eq!(t.c, vec![0.5]);
        assert_eq!(t.b, vec![1.0]);
        assert!((t.a[(0, 0)] - 0.5).abs() < 1e-16);
    }

    #[test]
    fn stage_count_range() {
        assert!(gauss_legendre_tableau(0).is_err());
        assert!(gauss_legendre_tableau(11).is_err());
        assert!(gauss_legendre_tableau(10).is_ok());
    }

    #[test]
    fn scalar_midpoint_is_crank_nicolson() {
        let lam = -2.0;
        let dt = 0.1;
        let zn = 1.5;
        let t = gauss_legendre_tableau(1).unwrap();
        let sys = assemble_stage_system(
            &SparseMatrix::identity(1),
            &SparseMatrix::from_diagonal(&[lam]),
            &[0.0],
            &[zn],
            dt,
            &t,
        )
        .unwrap();
        assert!((sys.matrix.get(0, 0) - (1.0 - dt * lam / 2.0)).abs() < 1e-16);
        assert_eq!(sys.rhs, vec![lam * zn]);
        let k = dense_lu_solve(&sys.matrix.to_dense(), &sys.rhs).unwrap();
        let z1 = reconstruct(&[zn], dt, &t, &k).unwrap()[0];
        let cn = zn * (1.0 + dt * lam / 2.0) / (1.0 - dt * lam / 2.0);
        assert!((z1 - cn).abs() < 1e-14);
    }

    #[test]
    fn constant_forcing() {
        let t = gauss_legendre_tableau(2).unwrap();
        let g = [1.0, -2.0];
        let sys = assemble_stage_system(
            &SparseMatrix::identity(2),
            &SparseMatrix::zeros(2, 2),
            &g,
            &[0.5, 0.5],
            0.2,
            &t,
        )
        .unwrap();
        let k = dense_lu_solve(&sys.matrix.to_dense(), &sys.rhs).unwrap();
        assert_eq!(k, vec![1.0, -2.0, 1.0, -2.0]);
        let z = reconstruct(&[0.5, 0.5], 0.2, &t, &k).unwrap();
        assert!((z[0] - 0.7).abs() < 1e-15 && (z[1] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn zero_stages_reconstruct_to_start() {
        let t = gauss_legendre_tableau(3).unwrap();
        let z = reconstruct(&[1.0, 2.0], 0.5, &t, &[0.0; 6]).unwrap();
        assert_eq!(z, vec![1.0, 2.0]);
    }
}
