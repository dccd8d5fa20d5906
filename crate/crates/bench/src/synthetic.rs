//! A seeded random conservative system for quick experiments.
//!
//! `ż = K z` with `K` sparse, skew-symmetric and `K 1 = 0`, built from
//! random oriented triangles. Crank-Nicolson then conserves both `1ᵀz` and
//! `½‖z‖²` exactly.

use cgmres_core::constraints::QuadraticConstraint;
use cgmres_core::linalg::{SparseMatrix, TripletBuilder};
use cgmres_problems::{Problem, ProblemError, Reconstruction, Result, StepSystem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct SyntheticProblem {
    generator: SparseMatrix,
    z0: Vec<f64>,
    constraints: Vec<QuadraticConstraint>,
}

impl SyntheticProblem {
    /// `cycles` random 3-cycles on `n` unknowns with weights in `[-1, 1]`.
    pub fn new(n: usize, cycles: usize, seed: u64) -> Result<Self> {
        if n < 3 {
            return Err(ProblemError::InvalidParameter(format!(
                "need at least 3 unknowns, got {n}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut k = TripletBuilder::with_capacity(n, n, 6 * cycles);
        for _ in 0..cycles {
            let i = rng.gen_range(0..n);
            let mut j = rng.gen_range(0..n);
            while j == i {
                j = rng.gen_range(0..n);
            }
            let mut l = rng.gen_range(0..n);
            while l == i || l == j {
                l = rng.gen_range(0..n);
            }
            let s: f64 = rng.gen_range(-1.0..1.0);
            for (a, b) in [(i, j), (j, l), (l, i)] {
                k.push(a, b, s);
                k.push(b, a, -s);
            }
        }
        let generator = k.build();
        let z0: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();

        let mass = QuadraticConstraint::linear(vec![1.0; n], 0.0, "mass");
        let energy =
            QuadraticConstraint::new(&SparseMatrix::from_diagonal(&vec![0.5; n]), vec![0.0; n], 0.0, "energy")?;
        let constraints = [mass, energy]
            .into_iter()
            .map(|c| {
                let target = c.evaluate(&z0)?;
                Ok(c.with_constant(-target))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            generator,
            z0,
            constraints,
        })
    }

    pub fn generator(&self) -> &SparseMatrix {
        &self.generator
    }
}

impl Problem for SyntheticProblem {
    fn name(&self) -> &'static str {
        "synthetic"
    }

    fn state_dim(&self) -> usize {
        self.z0.len()
    }

    fn initial_state(&self) -> Vec<f64> {
        self.z0.clone()
    }

    fn invariants(&self, _z_prev: &[f64], _dt: f64) -> Result<Vec<QuadraticConstraint>> {
        Ok(self.constraints.clone())
    }

    fn step_system(&self, z_n: &[f64], dt: f64) -> Result<StepSystem> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(ProblemError::InvalidParameter(format!(
                "time step must be positive, got {dt}"
            )));
        }
        let eye = SparseMatrix::identity(self.z0.len());
        let matrix = eye.linear_combination(1.0, &self.generator, -0.5 * dt)?;
        let rhs = eye.linear_combination(1.0, &self.generator, 0.5 * dt)?.spmv(z_n)?;
        Ok(StepSystem {
            matrix,
            rhs,
            constraints: self.constraints.clone(),
            reconstruction: Reconstruction::Direct,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use cgmres_core::linalg::dense_lu_solve;

    #[test]
    fn generator_is_skew_with_constant_null_vector() {
        let p = SyntheticProblem::new(30, 40, 1).unwrap();
        let k = p.generator();
        let sum = k.linear_combination(1.0, &k.transpose(), 1.0).unwrap();
        assert!(sum.norm_inf() == 0.0);
        assert!(k.spmv(&[1.0; 30]).unwrap().iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn exact_step_conserves() {
        let p = SyntheticProblem::new(25, 30, 4).unwrap();
        let z0 = p.initial_state();
        let s = p.step_system(&z0, 0.3).unwrap();
        let z1 = dense_lu_solve(&s.matrix.to_dense(), &s.rhs).unwrap();
        for c in &s.constraints {
            assert!(c.evaluate(&z1).unwrap().abs() < 1e-12);
        }
    }
}
