#![allow(dead_code)]

use cgmres_core::linalg::{dense_lu_solve, SparseMatrix};
use cgmres_core::preconditioners::Ilut;
use cgmres_problems::{Problem, StepSystem};

pub fn dense_solve(a: &SparseMatrix, b: &[f64]) -> Vec<f64> {
    dense_lu_solve(&a.to_dense(), b).unwrap()
}

pub fn sparse_solve(a: &SparseMatrix, b: &[f64]) -> Vec<f64> {
    let lu = Ilut::exact(a).unwrap();
    assert_eq!(lu.shifted_pivots(), 0);
    lu.solve(b).unwrap()
}

pub fn exact_step(sys: &StepSystem) -> Vec<f64> {
    let x = if sys.dim() <= 600 {
        dense_solve(&sys.matrix, &sys.rhs)
    } else {
        sparse_solve(&sys.matrix, &sys.rhs)
    };
    sys.state(&x).unwrap()
}

/// Largest `|g_i(z^k)|` over all steps, per invariant (each invariant is
/// built from the previous state).
pub fn exact_evolution_drift(p: &dyn Problem, dt: f64, steps: usize) -> Vec<f64> {
    let mut z = p.initial_state();
    let mut worst = vec![0.0f64; p.invariants(&z, dt).unwrap().len()];
    for _ in 0..steps {
        let laws = p.invariants(&z, dt).unwrap();
        let next = exact_step(&p.step_system(&z, dt).unwrap());
        for (w, g) in worst.iter_mut().zip(&laws) {
            *w = w.max(g.evaluate(&next).unwrap().abs());
        }
        z = next;
    }
    worst
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
