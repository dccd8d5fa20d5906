//! Finite-element model problems whose time steppers conserve (or
//! dissipate) quadratic quantities: linear KdV on a periodic DG mesh,
//! rotating shallow water with lowest-order Raviart-Thomas elements, and
//! the heat equation with P1 elements.
//!
//! Each problem produces, per time step, a sparse linear system, the
//! constraints an exact solve would satisfy, and a map from the solve
//! unknown back to the state.

pub mod heat;
pub mod lkdv;
pub mod swe;

mod error;

pub use error::{ProblemError, Result};

use cgmres_core::constraints::QuadraticConstraint;
use cgmres_core::glrk::{reconstruct, ButcherTableau};
use cgmres_core::linalg::SparseMatrix;

/// How the unknown of a step system maps to the next state.
#[derive(Debug, Clone)]
pub enum Reconstruction {
    /// The unknown is the next state.
    Direct,
    /// The unknown stacks stage derivatives; `z_{n+1} = z_n + dt Σ bᵢ kⁱ`.
    Stages {
        z_n: Vec<f64>,
        dt: f64,
        tableau: ButcherTableau,
    },
}

/// One time step as a linear system plus constraints on its unknown.
#[derive(Debug, Clone)]
pub struct StepSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    pub constraints: Vec<QuadraticConstraint>,
    pub reconstruction: Reconstruction,
}

impl StepSystem {
    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    /// The state after the step given the solve unknown `x`.
    pub fn state(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("StepSystem::state", self.dim(), x.len())?;
        match &self.reconstruction {
            Reconstruction::Direct => Ok(x.to_vec()),
            Reconstruction::Stages { z_n, dt, tableau } => Ok(reconstruct(z_n, *dt, tableau, x)?),
        }
    }
}

/// A time-dependent problem with quadratic invariants.
pub trait Problem {
    fn name(&self) -> &'static str;

    fn state_dim(&self) -> usize;

    fn initial_state(&self) -> Vec<f64>;

    /// The laws a step from `z_prev` must satisfy, as constraints on the
    /// next state. Conservation laws ignore `z_prev`; dissipation laws do not.
    fn invariants(&self, z_prev: &[f64], dt: f64) -> Result<Vec<QuadraticConstraint>>;

    fn step_system(&self, z_n: &[f64], dt: f64) -> Result<StepSystem>;

    /// L2 error against a known exact solution, if there is one.
    fn l2_error(&self, _z: &[f64], _t: f64) -> Option<f64> {
        None
    }
}

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(cgmres_core::Error::DimensionMismatch {
            context,
            expected,
            found,
        }
        .into())
    }
}
