//! Flexible and constrained GMRES for structure-preserving time stepping.
//!
//! The crate provides sparse/dense linear algebra, preconditioners, flexible
//! GMRES, a constrained variant (CGMRES) that imposes quadratic invariants
//! on the Krylov iterate, the small equality-constrained solver it relies
//! on, and Gauss-Legendre Runge-Kutta stage assembly.
//!
//! ```
//! use cgmres_core::linalg::SparseMatrix;
//! use cgmres_core::preconditioners::Identity;
//! use cgmres_core::krylov::fgmres;
//!
//! let a = SparseMatrix::from_diagonal(&[1.0, 2.0, 3.0]);
//! let (x, report) = fgmres(&a, &[1.0, 1.0, 1.0], &[0.0; 3], &Identity::new(3), 1e-12, 10).unwrap();
//! assert!(report.converged());
//! assert!((x[2] - 1.0 / 3.0).abs() < 1e-12);
//! ```

pub mod cgmres;
pub mod constraints;
pub mod error;
pub mod glrk;
pub mod krylov;
pub mod linalg;
pub mod mtx;
pub mod preconditioners;
pub mod quadrature;
pub mod sqp;

pub use cgmres::{cgmres_optimised, cgmres_prototype};
pub use constraints::{QuadraticConstraint, ReducedConstraint};
pub use error::{Error, Result};
pub use krylov::{fgmres, IterationPhase, SolveReport, SolveStatus};
pub use linalg::{DenseMatrix, SparseMatrix};
pub use preconditioners::Preconditioner;
pub use sqp::{solve_constrained, EcProblem, EcSolution, EcStatus, SqpOptions};
