use crate::error::{check_len, Error, Result};

use super::DenseMatrix;

/// Diagonal entries of `R` below this multiple of `‖A‖_F` signal rank deficiency.
pub const RANK_RTOL: f64 = 1e-14;

/// Solution of a dense least-squares problem.
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    pub solution: Vec<f64>,
    /// `‖A y - b‖₂` at the minimiser, read off the transformed right-hand side.
    pub residual_norm: f64,
}

/// Minimises `‖A y - b‖₂` for `A` of shape `m × n`, `m ≥ n`, by Householder QR.
pub fn qr_lstsq(a: &DenseMatrix, b: &[f64]) -> Result<LeastSquares> {
    let (m, n) = a.shape();
    check_len("qr_lstsq", m, b.len())?;
    if m < n {
        return Err(Error::InvalidArgument(format!("qr_lstsq needs m >= n, got {m}x{n}")));
    }
    let scale = a.norm_frobenius();
    let mut r = a.clone();
    let mut rhs = b.to_vec();
    let mut v = vec![0.0; m];

    for j in 0..n {
        // trailing exact zeros of the column leave the reflector shorter,
        // which makes Hessenberg input cost O(n²) overall
        let end = (j..m).rev().find(|&i| r[(i, j)] != 0.0).map_or(j + 1, |i| i + 1);
        let col_norm = (j..end).map(|i| r[(i, j)] * r[(i, j)]).sum::<f64>().sqrt();
        if !(col_norm > RANK_RTOL * scale) {
            return Err(Error::RankDeficient {
                column: j,
                diag: col_norm,
            });
        }
        let x0 = r[(j, j)];
        let alpha = if x0 >= 0.0 { -col_norm } else { col_norm };
        for i in j..end {
            v[i] = r[(i, j)];
        }
        v[j] -= alpha;
        let vnorm2: f64 = (j..end).map(|i| v[i] * v[i]).sum();
        if vnorm2 > 0.0 {
            for k in j..n {
                let s: f64 = (j..end).map(|i| v[i] * r[(i, k)]).sum::<f64>() * 2.0 / vnorm2;
                for i in j..end {
                    r[(i, k)] -= s * v[i];
                }
            }
            let s: f64 = (j..end).map(|i| v[i] * rhs[i]).sum::<f64>() * 2.0 / vnorm2;
            for i in j..end {
                rhs[i] -= s * v[i];
            }
        }
        r[(j, j)] = alpha;
        for i in j + 1..end {
            r[(i, j)] = 0.0;
        }
    }

    let mut y = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| r[(i, k)] * y[k]).sum();
        y[i] = (rhs[i] - s) / r[(i, i)];
    }
    let residual_norm = rhs[n..].iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(LeastSquares {
        solution: y,
        residual_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dense_lu_solve, norm2, sub};

    #[test]
    fn square_matches_lu() {
        let a = DenseMatrix::from_rows(&[vec![4.0, 1.0, 0.5], vec![-1.0, 3.0, 0.0], vec![0.2, 0.1, 2.0]]).unwrap();
        let b = [1.0, 2.0, 3.0];
        let ls = qr_lstsq(&a, &b).unwrap();
        let lu = dense_lu_solve(&a, &b).unwrap();
        assert!(norm2(&sub(&ls.solution, &lu)) < 1e-14);
        assert!(ls.residual_norm < 1e-14);
    }

    #[test]
    fn single_column_cases() {
        let a = DenseMatrix::from_rows(&[vec![1.0], vec![0.0]]).unwrap();
        let ls = qr_lstsq(&a, &[1.0, 1.0]).unwrap();
        assert!((ls.solution[0] - 1.0).abs() < 1e-15);
        assert!((ls.residual_norm - 1.0).abs() < 1e-15);

        let a = DenseMatrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        let ls = qr_lstsq(&a, &[0.0, 2.0]).unwrap();
        assert!((ls.solution[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rank_deficiency_detected() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(
            qr_lstsq(&a, &[1.0, 0.0, 0.0]),
            Err(Error::RankDeficient { column: 1, .. })
        ));
    }

    #[test]
    fn residual_orthogonal_to_range() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![0.5, -1.0], vec![3.0, 0.25], vec![-2.0, 1.0]]).unwrap();
        let b = [1.0, -1.0, 0.5, 2.0];
        let ls = qr_lstsq(&a, &b).unwrap();
        let r = sub(&a.matvec(&ls.solution).unwrap(), &b);
        assert!((norm2(&r) - ls.residual_norm).abs() < 1e-14);
        let atr = a.tr_matvec(&r).unwrap();
        assert!(norm2(&atr) <= 1e-10 * a.norm_frobenius() * norm2(&b));
    }
}
