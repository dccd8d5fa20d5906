//! Constrained flexible GMRES.
//!
//! Both drivers share the Arnoldi loop of [`crate::krylov`] and differ only
//! in how the small problem over the Krylov space is solved:
//!
//! * [`cgmres_prototype`] solves a constrained problem every iteration,
//!   activating one more constraint per iteration (`min(ℓ-1, c)` at `ℓ`).
//! * [`cgmres_optimised`] runs plain least-squares solves until the previous
//!   residual estimate drops to `epsilon`, and only then imposes every
//!   constraint, falling back to least squares when the constrained solve
//!   fails.

use std::time::Instant;

use crate::constraints::{QuadraticConstraint, Reducer};
use crate::error::{Error, Result};
use crate::krylov::{run, IterationOutcome, IterationPhase, IterationView, SolveReport, SubspaceSolver, Unconstrained};
use crate::linalg::SparseMatrix;
use crate::preconditioners::Preconditioner;
use crate::sqp::{solve_constrained, EcProblem, EcSolution, SqpOptions};

/// Relative size below which reduced coefficients count as rounding noise.
const CONSTANT_RTOL: f64 = 1e-10;

/// Incremental reductions of a prefix of the constraint list.
struct ReducedSet<'a> {
    constraints: &'a [QuadraticConstraint],
    reducers: Vec<Reducer<'a>>,
}

impl<'a> ReducedSet<'a> {
    fn new(constraints: &'a [QuadraticConstraint]) -> Self {
        Self {
            constraints,
            reducers: Vec::new(),
        }
    }

    /// Brings the first `k` reductions up to date with the basis.
    fn update(&mut self, k: usize, view: &IterationView<'_>) -> Result<()> {
        while self.reducers.len() < k {
            let c = &self.constraints[self.reducers.len()];
            self.reducers.push(Reducer::new(c, view.x0)?);
        }
        let cols = view.state.z_columns();
        for r in &mut self.reducers[..k] {
            r.extend(cols)?;
        }
        Ok(())
    }

    fn solve(&self, k: usize, view: &IterationView<'_>, opts: &SqpOptions) -> Result<EcSolution> {
        // A constraint that is constant on the search space and already
        // holds at x0 is satisfied by every iterate; keeping it would make
        // the KKT system singular.
        let constraints = self.reducers[..k]
            .iter()
            .map(Reducer::reduced)
            .zip(&self.reducers[..k])
            .filter(|(c, r)| !(r.is_constant(CONSTANT_RTOL) && c.g0.abs() <= opts.feas_tol * c.g0_scale.max(1.0)))
            .map(|(c, _)| c)
            .collect();
        let problem = EcProblem {
            h: view.hessenberg.clone(),
            beta: view.state.beta(),
            constraints,
            y_init: None,
        };
        solve_constrained(&problem, opts)
    }
}

/// Runs the constrained solve with `k` active constraints, falling back to
/// the least-squares minimiser when it does not reach an optimal point.
fn constrained_outcome(
    set: &mut ReducedSet<'_>,
    k: usize,
    view: &IterationView<'_>,
    opts: &SqpOptions,
) -> Result<IterationOutcome> {
    let t = Instant::now();
    set.update(k, view)?;
    let reduce_seconds = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let sol = match set.solve(k, view, opts) {
        Ok(sol) => Some(sol),
        Err(Error::RankDeficient { .. }) | Err(Error::SingularMatrix { .. }) => None,
        Err(e) => return Err(e),
    };
    let constrained_seconds = t.elapsed().as_secs_f64();

    Ok(match sol {
        Some(sol) if sol.is_optimal() => IterationOutcome {
            y: sol.y,
            estimate: sol.residual_norm,
            check: true,
            phase: IterationPhase::ConstrainedOk,
            reduce_seconds,
            constrained_seconds,
        },
        _ => IterationOutcome {
            y: view.ls.solution.clone(),
            estimate: view.ls.residual_norm,
            check: true,
            phase: IterationPhase::ConstrainedFailed,
            reduce_seconds,
            constrained_seconds,
        },
    })
}

struct Prototype<'a> {
    set: ReducedSet<'a>,
    opts: SqpOptions,
}

impl SubspaceSolver for Prototype<'_> {
    fn solve(&mut self, view: &IterationView<'_>) -> Result<IterationOutcome> {
        let k = (view.ell - 1).min(self.set.constraints.len());
        if k == 0 {
            return Unconstrained.solve(view);
        }
        constrained_outcome(&mut self.set, k, view, &self.opts)
    }
}

struct Optimised<'a> {
    set: ReducedSet<'a>,
    opts: SqpOptions,
    epsilon: f64,
}

impl SubspaceSolver for Optimised<'_> {
    fn solve(&mut self, view: &IterationView<'_>) -> Result<IterationOutcome> {
        let c = self.set.constraints.len();
        if c == 0 {
            return Unconstrained.solve(view);
        }
        let gate_open = view.prev_estimate > self.epsilon && !view.is_last && !view.state.breakdown();
        if gate_open {
            let mut out = Unconstrained.solve(view)?;
            out.check = false;
            return Ok(out);
        }
        constrained_outcome(&mut self.set, c.min(view.ell), view, &self.opts)
    }
}

/// Constrained GMRES imposing `min(ℓ-1, c)` constraints at iteration `ℓ`,
/// in list order. Misfits of all constraints are recorded per iteration.
#[allow(clippy::too_many_arguments)]
pub fn cgmres_prototype(
    a: &SparseMatrix,
    b: &[f64],
    x0: &[f64],
    precond: &dyn Preconditioner,
    tol: f64,
    ell_max: usize,
    constraints: &[QuadraticConstraint],
) -> Result<(Vec<f64>, SolveReport)> {
    cgmres_prototype_with(a, b, x0, precond, tol, ell_max, constraints, &SqpOptions::default())
}

#[allow(clippy::too_many_arguments)]
pub fn cgmres_prototype_with(
    a: &SparseMatrix,
    b: &[f64],
    x0: &[f64],
    precond: &dyn Preconditioner,
    tol: f64,
    ell_max: usize,
    constraints: &[QuadraticConstraint],
    opts: &SqpOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    cgmres_prototype_monitored(a, b, x0, precond, tol, ell_max, constraints, constraints, opts)
}

/// [`cgmres_prototype_with`] recording the misfits of `monitor` instead of
/// the imposed constraints.
#[allow(clippy::too_many_arguments)]
pub fn cgmres_prototype_monitored(
    a: &SparseMatrix,
    b: &[f64],
    x0: &[f64],
    precond: &dyn Preconditioner,
    tol: f64,
    ell_max: usize,
    constraints: &[QuadraticConstraint],
    monitor: &[QuadraticConstraint],
    opts: &SqpOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    let mut solver = Prototype {
        set: ReducedSet::new(constraints),
        opts: *opts,
    };
    run(a, b, x0, precond, tol, ell_max, monitor, &mut solver)
}

/// Constrained GMRES with the residual gate: all constraints are imposed
/// once the previous iteration's least-squares residual is at most
/// `epsilon` (or at `ell_max`, or on breakdown).
#[allow(clippy::too_many_arguments)]
pub fn cgmres_optimised(
    a: &SparseMatrix,
    b: &[f64],
    x0: &[f64],
    precond: &dyn Preconditioner,
    tol: f64,
    epsilon: f64,
    ell_max: usize,
    constraints: &[QuadraticConstraint],
) -> Result<(Vec<f64>, SolveReport)> {
    cgmres_optimised_with(
        a,
        b,
        x0,
        precond,
        tol,
        epsilon,
        ell_max,
        constraints,
        &[],
        &SqpOptions::default(),
    )
}

/// [`cgmres_optimised`] with explicit SQP options and a list of constraints
/// whose misfits are recorded every iteration.
#[allow(clippy::too_many_arguments)]
pub fn cgmres_optimised_with(
    a: &SparseMatrix,
    b: &[f64],
    x0: &[f64],
    precond: &dyn Preconditioner,
    tol: f64,
    epsilon: f64,
    ell_max: usize,
    constraints: &[QuadraticConstraint],
    monitor: &[QuadraticConstraint],
    opts: &SqpOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    if !(epsilon >= tol) {
        return Err(Error::InvalidArgument(format!(
            "epsilon ({epsilon}) must not be smaller than tol ({tol})"
        )));
    }
    let mut solver = Optimised {
        set: ReducedSet::new(constraints),
        opts: *opts,
        epsilon,
    };
    run(a, b, x0, precond, tol, ell_max, monitor, &mut solver)
}
