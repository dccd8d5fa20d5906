//! Flexible GMRES with a preconditioned Arnoldi process.
//!
//! The iteration is written once, in [`run`], and parameterised by a
//! [`SubspaceSolver`] that decides how the small Hessenberg problem is
//! solved each iteration. Plain FGMRES uses the least-squares minimiser;
//! the constrained drivers in [`crate::cgmres`] plug in their own rule.

use std::time::Instant;

use crate::constraints::QuadraticConstraint;
use crate::error::{check_len, Error, Result};
use crate::linalg::{all_finite, axpy, dot, norm2, qr_lstsq, DenseMatrix, LeastSquares, SparseMatrix};
use crate::preconditioners::Preconditioner;

/// `h_{l+1,l}` below this multiple of `‖A z_l‖` is treated as a lucky breakdown.
pub const BREAKDOWN_RTOL: f64 = 1e-12;
/// A second Gram-Schmidt pass runs when orthogonalisation shrinks the
/// vector by more than this factor.
const REORTH_FACTOR: f64 = std::f64::consts::SQRT_2;

/// Growing Arnoldi workspace: `Q` (orthonormal), `Z = P Q` and `H`.
#[derive(Debug, Clone)]
pub struct KrylovState {
    q: Vec<Vec<f64>>,
    z: Vec<Vec<f64>>,
    /// column `j` holds `h_{0..=j+1, j}`
    h: Vec<Vec<f64>>,
    beta: f64,
    breakdown: bool,
}

impl KrylovState {
    /// Starts the basis from `r0 = b - A x0`. Fails on a zero residual.
    pub fn new(r0: &[f64]) -> Result<Self> {
        let beta = norm2(r0);
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "Krylov basis needs a finite nonzero residual, got norm {beta}"
            )));
        }
        Ok(Self {
            q: vec![r0.iter().map(|x| x / beta).collect()],
            z: Vec::new(),
            h: Vec::new(),
            beta,
            breakdown: false,
        })
    }

    pub fn dim(&self) -> usize {
        self.q[0].len()
    }

    /// Number of completed Arnoldi steps.
    pub fn ell(&self) -> usize {
        self.z.len()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn breakdown(&self) -> bool {
        self.breakdown
    }

    pub fn q_columns(&self) -> &[Vec<f64>] {
        &self.q
    }

    pub fn z_columns(&self) -> &[Vec<f64>] {
        &self.z
    }

    /// `Q` as an `n × (ℓ+1)` matrix (`n × ℓ` after a breakdown).
    pub fn q_matrix(&self) -> DenseMatrix {
        DenseMatrix::from_columns(self.dim(), &self.q).expect("basis columns share a length")
    }

    pub fn z_matrix(&self) -> DenseMatrix {
        DenseMatrix::from_columns(self.dim(), &self.z).expect("basis columns share a length")
    }

    /// The `(ℓ+1) × ℓ` upper Hessenberg matrix.
    pub fn hessenberg(&self) -> DenseMatrix {
        let l = self.ell();
        let mut h = DenseMatrix::zeros(l + 1, l);
        for (j, col) in self.h.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                h[(i, j)] = v;
            }
        }
        h
    }

    /// `β e₁` of length `ℓ+1`.
    pub fn rhs(&self) -> Vec<f64> {
        let mut e = vec![0.0; self.ell() + 1];
        e[0] = self.beta;
        e
    }

    /// `x0 + Z y`.
    pub fn assemble(&self, x0: &[f64], y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.ell());
        let mut x = x0.to_vec();
        for (zj, &yj) in self.z.iter().zip(y) {
            axpy(yj, zj, &mut x);
        }
        x
    }
}

/// Seconds spent in each phase of a solve.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTimings {
    pub precondition: f64,
    pub matvec: f64,
    pub orthogonalise: f64,
    pub hessenberg_solve: f64,
    pub constraint_reduce: f64,
    pub constrained_solve: f64,
}

impl PhaseTimings {
    pub fn total(&self) -> f64 {
        self.precondition
            + self.matvec
            + self.orthogonalise
            + self.hessenberg_solve
            + self.constraint_reduce
            + self.constrained_solve
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIter,
    Breakdown,
}

/// How the small problem was solved in one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IterationPhase {
    Unconstrained,
    ConstrainedOk,
    ConstrainedFailed,
}

impl IterationPhase {
    pub fn as_str(&self) -> &'static str {
        match self {
            IterationPhase::Unconstrained => "unconstrained",
            IterationPhase::ConstrainedOk => "constrained_ok",
            IterationPhase::ConstrainedFailed => "constrained_failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// `‖b - A x0‖`.
    pub initial_residual: f64,
    /// Residual estimate of the iterate chosen at each iteration.
    pub residual_history: Vec<f64>,
    /// Per iteration, misfit of each monitored constraint at the iterate.
    pub constraint_misfit_history: Vec<Vec<f64>>,
    pub phases: Vec<IterationPhase>,
    pub iterations: usize,
    pub status: SolveStatus,
    pub timings: PhaseTimings,
    /// Per-iteration cost excluding constraint reduction.
    pub iteration_seconds: Vec<f64>,
    /// Per-iteration cost of reducing constraints onto the Krylov space.
    pub reduce_seconds: Vec<f64>,
}

impl SolveReport {
    fn new(initial_residual: f64) -> Self {
        Self {
            initial_residual,
            residual_history: Vec::new(),
            constraint_misfit_history: Vec::new(),
            phases: Vec::new(),
            iterations: 0,
            status: SolveStatus::MaxIter,
            timings: PhaseTimings::default(),
            iteration_seconds: Vec::new(),
            reduce_seconds: Vec::new(),
        }
    }

    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(self.initial_residual)
    }

    pub fn constrained_iterations(&self) -> usize {
        self.phases
            .iter()
            .filter(|p| **p != IterationPhase::Unconstrained)
            .count()
    }

    pub fn failed_constrained_iterations(&self) -> usize {
        self.phases
            .iter()
            .filter(|p| **p == IterationPhase::ConstrainedFailed)
            .count()
    }
}

/// Preconditions `q_ℓ`, multiplies by `A` and orthogonalises by modified
/// Gram-Schmidt, extending `Z`, `H` and (unless it breaks down) `Q`.
pub fn arnoldi_step(state: &mut KrylovState, a: &SparseMatrix, precond: &dyn Preconditioner) -> Result<()> {
    let mut timings = PhaseTimings::default();
    arnoldi_step_timed(state, a, precond, &mut timings)
}

fn arnoldi_step_timed(
    state: &mut KrylovState,
    a: &SparseMatrix,
    precond: &dyn Preconditioner,
    timings: &mut PhaseTimings,
) -> Result<()> {
    let n = state.dim();
    check_len("arnoldi_step (matrix rows)", n, a.nrows())?;
    check_len("arnoldi_step (matrix cols)", n, a.ncols())?;
    check_len("arnoldi_step (preconditioner)", n, precond.dim())?;
    if state.breakdown {
        return Err(Error::InvalidArgument("Arnoldi process already broke down".into()));
    }
    let ell = state.ell();

    let t = Instant::now();
    let mut z = vec![0.0; n];
    precond.apply(&state.q[ell], &mut z);
    timings.precondition += t.elapsed().as_secs_f64();
    if !all_finite(&z) {
        return Err(Error::PreconditionerFailure { iteration: ell + 1 });
    }

    let t = Instant::now();
    let mut w = vec![0.0; n];
    a.spmv_into(&z, &mut w);
    timings.matvec += t.elapsed().as_secs_f64();

    let t = Instant::now();
    let w_norm0 = norm2(&w);
    let mut h = vec![0.0; ell + 2];
    for (i, qi) in state.q.iter().enumerate() {
        let hij = dot(&w, qi);
        axpy(-hij, qi, &mut w);
        h[i] = hij;
    }
    let mut w_norm = norm2(&w);
    if w_norm * REORTH_FACTOR < w_norm0 {
        for (i, qi) in state.q.iter().enumerate() {
            let c = dot(&w, qi);
            axpy(-c, qi, &mut w);
            h[i] += c;
        }
        w_norm = norm2(&w);
    }
    if !w_norm.is_finite() {
        return Err(Error::PreconditionerFailure { iteration: ell + 1 });
    }
    if w_norm <= BREAKDOWN_RTOL * w_norm0 || w_norm == 0.0 {
        h[ell + 1] = 0.0;
        state.breakdown = true;
    } else {
        h[ell + 1] = w_norm;
        for wi in w.iter_mut() {
            *wi /= w_norm;
        }
        state.q.push(w);
    }
    timings.orthogonalise += t.elapsed().as_secs_f64();

    state.z.push(z);
    state.h.push(h);
    Ok(())
}

/// Read-only view handed to a [`SubspaceSolver`] once per iteration.
pub(crate) struct IterationView<'a> {
    pub ell: usize,
    pub x0: &'a [f64],
    pub state: &'a KrylovState,
    pub hessenberg: &'a DenseMatrix,
    /// Unconstrained least-squares minimiser of this iteration.
    pub ls: &'a LeastSquares,
    /// Unconstrained residual estimate of the previous iteration (`β` at `ℓ = 1`).
    pub prev_estimate: f64,
    pub is_last: bool,
}

pub(crate) struct IterationOutcome {
    pub y: Vec<f64>,
    pub estimate: f64,
    /// Whether the stopping test is applied this iteration.
    pub check: bool,
    pub phase: IterationPhase,
    pub reduce_seconds: f64,
    pub constrained_seconds: f64,
}

pub(crate) trait SubspaceSolver {
    fn solve(&mut self, view: &IterationView<'_>) -> Result<IterationOutcome>;
}

/// Least-squares minimiser every iteration.
pub(crate) struct Unconstrained;

impl SubspaceSolver for Unconstrained {
    fn solve(&mut self, view: &IterationView<'_>) -> Result<IterationOutcome> {
        Ok(IterationOutcome {
            y: view.ls.solution.clone(),
            estimate: view.ls.residual_norm,
            check: true,
            phase: IterationPhase::Unconstrained,
            reduce_seconds: 0.0,
            constrained_seconds: 0.0,
        })
    }
}

/// The shared flexible GMRES loop.
#[allow(clippy::too_many_arguments)]
pub(crate) fn run(
    a: &SparseMatrix,
    b: &[f64],
    x0: &[f64],
    precond: &dyn Preconditioner,
    tol: f64,
    ell_max: usize,
    monitor: &[QuadraticConstraint],
    solver: &mut dyn SubspaceSolver,
) -> Result<(Vec<f64>, SolveReport)> {
    let n = b.len();
    check_len("krylov solve (matrix rows)", n, a.nrows())?;
    check_len("krylov solve (matrix cols)", n, a.ncols())?;
    check_len("krylov solve (initial guess)", n, x0.len())?;
    check_len("krylov solve (preconditioner)", n, precond.dim())?;
    for c in monitor {
        check_len("krylov solve (monitored constraint)", n, c.dim())?;
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }

    let t = Instant::now();
    let mut r0 = a.spmv(x0)?;
    for (ri, bi) in r0.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let beta = norm2(&r0);
    let mut report = SolveReport::new(beta);
    report.timings.matvec += t.elapsed().as_secs_f64();
    if beta == 0.0 {
        report.status = SolveStatus::Converged;
        return Ok((x0.to_vec(), report));
    }
    if !beta.is_finite() {
        return Err(Error::InvalidArgument("initial residual is not finite".into()));
    }

    let mut state = KrylovState::new(&r0)?;
    let mut y: Vec<f64> = Vec::new();
    let mut prev_estimate = beta;

    for ell in 1..=ell_max {
        let mut step = PhaseTimings::default();
        arnoldi_step_timed(&mut state, a, precond, &mut step)?;

        let t = Instant::now();
        let hess = state.hessenberg();
        let ls = qr_lstsq(&hess, &state.rhs())?;
        step.hessenberg_solve += t.elapsed().as_secs_f64();

        let view = IterationView {
            ell,
            x0,
            state: &state,
            hessenberg: &hess,
            ls: &ls,
            prev_estimate,
            is_last: ell == ell_max,
        };
        let outcome = solver.solve(&view)?;
        step.constraint_reduce += outcome.reduce_seconds;
        step.constrained_solve += outcome.constrained_seconds;

        report.iteration_seconds.push(step.total() - step.constraint_reduce);
        report.reduce_seconds.push(step.constraint_reduce);
        add_timings(&mut report.timings, &step);
        report.residual_history.push(outcome.estimate);
        report.phases.push(outcome.phase);
        report.iterations = ell;
        if !monitor.is_empty() {
            let x = state.assemble(x0, &outcome.y);
            report
                .constraint_misfit_history
                .push(monitor.iter().map(|c| c.evaluate_unchecked(&x)).collect());
        }
        prev_estimate = ls.residual_norm;
        y = outcome.y;

        if outcome.check && outcome.estimate < tol {
            report.status = SolveStatus::Converged;
            break;
        }
        if state.breakdown() {
            report.status = SolveStatus::Breakdown;
            break;
        }
        report.status = SolveStatus::MaxIter;
    }

    let x = if y.is_empty() {
        x0.to_vec()
    } else {
        state.assemble(x0, &y)
    };
    Ok((x, report))
}

fn add_timings(total: &mut PhaseTimings, step: &PhaseTimings) {
    total.precondition += step.precondition;
    total.matvec += step.matvec;
    total.orthogonalise += step.orthogonalise;
    total.hessenberg_solve += step.hessenberg_solve;
    total.constraint_reduce += step.constraint_reduce;
    total.constrained_solve += step.constrained_solve;
}

/// Flexible GMRES with right preconditioning and absolute stopping test
/// `‖b - A x‖ < tol`, without restarts.
pub fn fgmres(
    a: &SparseMatrix,
    b: &[f64],
    x0: &[f64],
    precond: &dyn Preconditioner,
    tol: f64,
    ell_max: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    run(a, b, x0, precond, tol, ell_max, &[], &mut Unconstrained)
}

/// [`fgmres`] that also records the misfit of `monitor` at every iterate.
pub fn fgmres_monitored(
    a: &SparseMatrix,
    b: &[f64],
    x0: &[f64],
    precond: &dyn Preconditioner,
    tol: f64,
    ell_max: usize,
    monitor: &[QuadraticConstraint],
) -> Result<(Vec<f64>, SolveReport)> {
    run(a, b, x0, precond, tol, ell_max, monitor, &mut Unconstrained)
}
