mod common;

use cgmres_core::cgmres::{cgmres_optimised, cgmres_prototype};
use cgmres_core::constraints::QuadraticConstraint;
use cgmres_core::krylov::{fgmres, IterationPhase};
use cgmres_core::linalg::{dense_lu_solve, norm2, sub, SparseMatrix};
use cgmres_core::preconditioners::{Identity, Jacobi};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn empty_constraint_lists_reproduce_fgmres() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..20 {
        let n = rng.gen_range(10..120);
        let a = common::random_sparse(&mut rng, n, 4);
        let b = common::random_vec(&mut rng, n);
        let x0 = common::random_vec(&mut rng, n);
        let p = Jacobi::new(&a).unwrap();
        let (x, r) = fgmres(&a, &b, &x0, &p, 1e-9, 60).unwrap();
        let (xp, rp) = cgmres_prototype(&a, &b, &x0, &p, 1e-9, 60, &[]).unwrap();
        let (xo, ro) = cgmres_optimised(&a, &b, &x0, &p, 1e-9, 1e-8, 60, &[]).unwrap();
        assert_eq!(x, xp);
        assert_eq!(x, xo);
        assert_eq!(r.residual_history, rp.residual_history);
        assert_eq!(r.residual_history, ro.residual_history);
        assert_eq!(r.status, ro.status);
    }
}

/// A random system with an "energy" constraint satisfied by its exact solution.
fn planted(seed: u64, n: usize) -> (SparseMatrix, Vec<f64>, Vec<QuadraticConstraint>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = common::random_sparse(&mut rng, n, 4);
    let b = common::random_vec(&mut rng, n);
    let x = dense_lu_solve(&a.to_dense(), &b).unwrap();
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
    let m = SparseMatrix::from_diagonal(&w);
    let energy = m.quadratic_form(&x).unwrap();
    let omega = common::random_vec(&mut rng, n);
    let mass: f64 = omega.iter().zip(&x).map(|(o, xi)| o * xi).sum();
    let cons = vec![
        QuadraticConstraint::linear(omega, -mass, "mass"),
        QuadraticConstraint::new(&m, vec![0.0; n], -energy, "energy").unwrap(),
    ];
    (a, b, cons)
}

#[test]
fn optimised_solution_satisfies_constraints_and_tolerance() {
    for seed in 0..5 {
        let n = 60;
        let (a, b, cons) = planted(seed, n);
        let tol = 1e-8;
        let (x, rep) = cgmres_optimised(&a, &b, &vec![0.0; n], &Identity::new(n), tol, 10.0 * tol, 100, &cons).unwrap();
        assert!(rep.converged());
        assert_eq!(*rep.phases.last().unwrap(), IterationPhase::ConstrainedOk);
        let true_res = norm2(&sub(&b, &a.spmv(&x).unwrap()));
        assert!(true_res <= 1.1 * tol, "seed {seed}: {true_res:e}");
        for c in &cons {
            assert!(c.evaluate(&x).unwrap().abs() <= 1e-11, "seed {seed}: {}", c.label());
        }
    }
}

#[test]
fn constrained_residual_not_below_unconstrained() {
    let n = 40;
    let (a, b, cons) = planted(99, n);
    let tol = 1e-7;
    let (_, rep) = cgmres_optimised(&a, &b, &vec![0.0; n], &Identity::new(n), tol, 10.0 * tol, 100, &cons).unwrap();
    let (_, plain) = fgmres(&a, &b, &vec![0.0; n], &Identity::new(n), 1e-300, rep.iterations).unwrap();
    assert!(rep.final_residual() >= plain.final_residual() * (1.0 - 1e-12));
}

#[test]
fn gate_reads_previous_iteration() {
    let n = 60;
    let (a, b, cons) = planted(7, n);
    let tol = 1e-8;
    let eps = 1e-5;
    let (_, rep) = cgmres_optimised(&a, &b, &vec![0.0; n], &Identity::new(n), tol, eps, 100, &cons).unwrap();
    let (_, plain) = fgmres(&a, &b, &vec![0.0; n], &Identity::new(n), tol, 100).unwrap();
    for (l, phase) in rep.phases.iter().enumerate() {
        let prev = if l == 0 {
            plain.initial_residual
        } else {
            plain.residual_history[l - 1]
        };
        let expect_constrained = prev <= eps;
        assert_eq!(
            *phase != IterationPhase::Unconstrained,
            expect_constrained,
            "iteration {}",
            l + 1
        );
    }
}

#[test]
fn prototype_adds_one_constraint_per_iteration() {
    let n = 30;
    let (a, b, cons) = planted(3, n);
    let (_, rep) = cgmres_prototype(&a, &b, &vec![0.0; n], &Identity::new(n), 1e-10, 100, &cons).unwrap();
    assert!(rep.converged());
    assert_eq!(rep.phases[0], IterationPhase::Unconstrained);
    for (l, m) in rep.constraint_misfit_history.iter().enumerate().skip(1) {
        if rep.phases[l] == IterationPhase::ConstrainedOk {
            assert!(m[0].abs() <= 1e-11);
            if l >= 2 {
                assert!(m[1].abs() <= 1e-11);
            }
        }
    }
}
