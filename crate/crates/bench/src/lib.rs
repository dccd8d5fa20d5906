//! Experiment runner for constrained GMRES: single solves, time evolutions
//! and timing sweeps on the model problems, written as CSV.

pub mod cli;
pub mod config;
pub mod csv;
pub mod runner;
pub mod synthetic;

pub use config::{ConstraintOrder, InitialGuess, PrecondKind, SolveParams, SolverKind};
pub use runner::{
    run_evolution, run_single_solve, run_timing, EvolutionSummary, SingleSolveSummary, StepSolver, TimingRow,
};
