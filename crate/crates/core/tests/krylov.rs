mod common;

use cgmres_core::krylov::{arnoldi_step, fgmres, KrylovState, SolveStatus};
use cgmres_core::linalg::{dense_lu_solve, norm2, sub, DenseMatrix, SparseMatrix};
use cgmres_core::preconditioners::{Identity, Ilut, Preconditioner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense inverse applied as a preconditioner.
struct DenseInverse(DenseMatrix);

impl Preconditioner for DenseInverse {
    fn dim(&self) -> usize {
        self.0.nrows()
    }
    fn apply(&self, r: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.0.matvec(r).unwrap());
    }
    fn name(&self) -> &'static str {
        "dense-inverse"
    }
}

fn inverse(a: &DenseMatrix) -> DenseMatrix {
    let n = a.nrows();
    let cols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            dense_lu_solve(a, &e).unwrap()
        })
        .collect();
    DenseMatrix::from_columns(n, &cols).unwrap()
}

#[test]
fn exact_preconditioner_breaks_down_at_first_step() {
    let dense = DenseMatrix::from_rows(&[
        vec![4.0, 1.0, 0.0, 0.5],
        vec![1.0, 3.0, 1.0, 0.0],
        vec![0.0, -1.0, 5.0, 1.0],
        vec![0.2, 0.0, 1.0, 2.0],
    ])
    .unwrap();
    let a = SparseMatrix::from_dense(&dense);
    let p = DenseInverse(inverse(&dense));
    let b = [1.0, 2.0, 3.0, 4.0];
    let (x, rep) = fgmres(&a, &b, &[0.0; 4], &p, 1e-10, 10).unwrap();
    assert_eq!(rep.iterations, 1);
    assert!(rep.converged());
    let exact = dense_lu_solve(&dense, &b).unwrap();
    assert!(norm2(&sub(&x, &exact)) < 1e-12);
}

#[test]
fn arnoldi_relation_on_random_systems() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..20 {
        let n = rng.gen_range(5..=200);
        let a = common::random_sparse(&mut rng, n, 4);
        let r0 = common::random_vec(&mut rng, n);
        let mut s = KrylovState::new(&r0).unwrap();
        let p = Identity::new(n);
        let steps = n.min(25);
        for _ in 0..steps {
            arnoldi_step(&mut s, &a, &p).unwrap();
            if s.breakdown() {
                break;
            }
        }
        let q = s.q_matrix();
        let qtq = q.transpose().matmul(&q).unwrap();
        let dev = qtq.sub(&DenseMatrix::identity(q.ncols())).unwrap().norm_inf();
        assert!(
            dev <= 1e-12,
            "trial {trial}: n={n} ell={} bd={} orthonormality {dev:e}",
            s.ell(),
            s.breakdown()
        );
        let az = a.to_dense().matmul(&s.z_matrix()).unwrap();
        let h = s.hessenberg();
        let qh = if s.breakdown() {
            let top = DenseMatrix::from_columns(
                h.nrows() - 1,
                &(0..h.ncols())
                    .map(|j| h.column(j)[..h.nrows() - 1].to_vec())
                    .collect::<Vec<_>>(),
            )
            .unwrap();
            q.matmul(&top).unwrap()
        } else {
            q.matmul(&h).unwrap()
        };
        let rel = az.sub(&qh).unwrap().norm_inf();
        assert!(rel <= 1e-10 * a.norm_inf(), "trial {trial}: relation {rel:e}");
        for j in 0..h.ncols() {
            assert!(h[(j + 1, j)] >= 0.0);
        }
    }
}

#[test]
fn iterate_minimises_residual_over_search_space() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 12;
    let a = common::random_sparse(&mut rng, n, 3);
    let b = common::random_vec(&mut rng, n);
    let x0 = common::random_vec(&mut rng, n);
    let tol = 1e-30;
    let ell = 4;
    let (x, rep) = fgmres(&a, &b, &x0, &Identity::new(n), tol, ell).unwrap();
    assert_eq!(rep.status, SolveStatus::MaxIter);
    let best = norm2(&sub(&b, &a.spmv(&x).unwrap()));
    // rebuild the search space and sample competitors
    let mut r0 = a.spmv(&x0).unwrap();
    for (ri, bi) in r0.iter_mut().zip(&b) {
        *ri = bi - *ri;
    }
    let mut s = KrylovState::new(&r0).unwrap();
    for _ in 0..ell {
        arnoldi_step(&mut s, &a, &Identity::new(n)).unwrap();
    }
    let y_star: Vec<f64> = {
        let diff = sub(&x, &x0);
        let z = s.z_matrix();
        cgmres_core::linalg::qr_lstsq(&z, &diff).unwrap().solution
    };
    for _ in 0..100 {
        let y: Vec<f64> = y_star.iter().map(|v| v + rng.gen_range(-0.1..0.1)).collect();
        let cand = s.assemble(&x0, &y);
        let r = norm2(&sub(&b, &a.spmv(&cand).unwrap()));
        assert!(r >= best * (1.0 - 1e-12));
    }
}

#[test]
fn recursive_residual_matches_true_residual() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..5 {
        let n = 80;
        let a = common::random_sparse(&mut rng, n, 5);
        let b = common::random_vec(&mut rng, n);
        let (x, rep) = fgmres(&a, &b, &vec![0.0; n], &Identity::new(n), 1e-6, 200).unwrap();
        assert!(rep.converged());
        let true_res = norm2(&sub(&b, &a.spmv(&x).unwrap()));
        let est = rep.final_residual();
        assert!(
            (true_res - est).abs() <= 1e-8 * true_res.max(est),
            "{true_res:e} vs {est:e}"
        );
    }
}

#[test]
fn ilut_reduces_iteration_count() {
    let n = 100;
    let a = common::laplacian_1d(n);
    let b = vec![1.0; n];
    let (_, plain) = fgmres(&a, &b, &vec![0.0; n], &Identity::new(n), 1e-8, 200).unwrap();
    let p = Ilut::new(&a, 1e-4, 10.0).unwrap();
    let (_, pre) = fgmres(&a, &b, &vec![0.0; n], &p, 1e-8, 200).unwrap();
    assert!(plain.converged() && pre.converged());
    assert!(pre.iterations < plain.iterations);
}

#[test]
fn exact_ilut_converges_in_one_iteration() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 60;
    let a = common::random_sparse(&mut rng, n, 4);
    let b = common::random_vec(&mut rng, n);
    let p = Ilut::exact(&a).unwrap();
    let (_, rep) = fgmres(&a, &b, &vec![0.0; n], &p, 1e-10, 10).unwrap();
    assert_eq!(rep.iterations, 1);
    assert!(rep.converged());
}

#[test]
fn identity_preconditioner_is_plain_gmres() {
    // With P = I, Z = Q and the iterate lies in x0 + K_ℓ(A, r0).
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 30;
    let a = common::random_sparse(&mut rng, n, 3);
    let r0 = common::random_vec(&mut rng, n);
    let mut s = KrylovState::new(&r0).unwrap();
    for _ in 0..6 {
        arnoldi_step(&mut s, &a, &Identity::new(n)).unwrap();
    }
    for (z, q) in s.z_columns().iter().zip(s.q_columns()) {
        assert_eq!(z, q);
    }
}
