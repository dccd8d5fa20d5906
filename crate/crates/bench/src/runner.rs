//! Single solves, time evolutions and timing sweeps, each writing CSV.

use std::io::Write;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use cgmres_core::cgmres::{cgmres_optimised_with, cgmres_prototype_monitored};
use cgmres_core::krylov::{fgmres_monitored, IterationPhase, SolveReport, SolveStatus};
use cgmres_core::linalg::{axpy, norm2, sub, SparseMatrix};
use cgmres_core::preconditioners::{Identity, Ilut, Jacobi, Preconditioner};
use cgmres_core::{QuadraticConstraint, SqpOptions};
use cgmres_problems::{Problem, Reconstruction, StepSystem};

use crate::config::{ConstraintOrder, InitialGuess, PrecondKind, SolveParams, SolverKind};
use crate::csv::{float, CsvWriter};

/// Iterative refinement passes after a direct solve.
const REFINE_STEPS: usize = 2;

enum Prepared {
    Identity(Identity),
    Jacobi(Jacobi),
    Ilut(Ilut),
    /// Complete LU of the matrix reordered by `perm`.
    Lu {
        factor: Ilut,
        perm: Vec<usize>,
    },
}

impl Prepared {
    fn preconditioner(&self) -> &dyn Preconditioner {
        match self {
            Prepared::Identity(p) => p,
            Prepared::Jacobi(p) => p,
            Prepared::Ilut(p) => p,
            Prepared::Lu { .. } => unreachable!("the LU is only used by direct solves"),
        }
    }
}

/// Result of one step solve.
#[derive(Debug, Clone)]
pub struct StepSolve {
    pub x: Vec<f64>,
    pub report: SolveReport,
    /// Seconds spent building the preconditioner or factorisation; zero
    /// when a cached one was reused.
    pub setup_seconds: f64,
    pub solve_seconds: f64,
}

/// Solves step systems with fixed parameters, reusing the preconditioner
/// while the matrix does not change.
pub struct StepSolver {
    params: SolveParams,
    cache: Option<(SparseMatrix, Prepared)>,
}

impl StepSolver {
    pub fn new(params: SolveParams) -> Result<Self> {
        params.validate().map_err(|e| anyhow!(e))?;
        Ok(Self { params, cache: None })
    }

    pub fn params(&self) -> &SolveParams {
        &self.params
    }

    /// The constraints to impose, picked from `available` by label.
    pub fn select(&self, available: &[QuadraticConstraint]) -> Result<Vec<QuadraticConstraint>> {
        match &self.params.order {
            ConstraintOrder::All => Ok(available.to_vec()),
            ConstraintOrder::Labels(labels) => labels
                .iter()
                .map(|l| {
                    available.iter().find(|c| c.label() == l).cloned().ok_or_else(|| {
                        let known: Vec<&str> = available.iter().map(|c| c.label()).collect();
                        anyhow!("unknown constraint '{l}'; this problem has {}", known.join(", "))
                    })
                })
                .collect(),
        }
    }

    fn prepare(&mut self, a: &SparseMatrix) -> Result<f64> {
        if let Some((m, _)) = &self.cache {
            if m == a {
                return Ok(0.0);
            }
        }
        let start = Instant::now();
        let prepared = match (self.params.solver, self.params.precond) {
            (SolverKind::Direct, _) => {
                let perm = a.reverse_cuthill_mckee();
                let factor = Ilut::exact(&a.permuted(&perm)?).context("factorising the step matrix")?;
                if factor.shifted_pivots() > 0 {
                    bail!("direct solve hit {} near-zero pivots", factor.shifted_pivots());
                }
                Prepared::Lu { factor, perm }
            }
            (_, PrecondKind::None) => Prepared::Identity(Identity::new(a.nrows())),
            (_, PrecondKind::Jacobi) => Prepared::Jacobi(Jacobi::new(a)?),
            (_, PrecondKind::Ilut) => Prepared::Ilut(Ilut::new(a, self.params.ilut_drop, self.params.ilut_fill)?),
        };
        let seconds = start.elapsed().as_secs_f64();
        self.cache = Some((a.clone(), prepared));
        Ok(seconds)
    }

    /// Solves `sys` from `x0`, recording the misfits of every constraint in
    /// `sys.constraints`.
    pub fn solve(&mut self, sys: &StepSystem, x0: &[f64]) -> Result<StepSolve> {
        let imposed = self.select(&sys.constraints)?;
        let monitor = &sys.constraints;
        let setup_seconds = self.prepare(&sys.matrix)?;
        let prepared = &self.cache.as_ref().expect("prepared above").1;
        let p = &self.params;
        let (a, b) = (&sys.matrix, &sys.rhs);
        let start = Instant::now();
        let (x, report) = match (p.solver, prepared) {
            (SolverKind::Direct, Prepared::Lu { factor, perm }) => {
                let lu_solve = |r: &[f64]| -> Result<Vec<f64>> {
                    let rp: Vec<f64> = perm.iter().map(|&i| r[i]).collect();
                    let yp = factor.solve(&rp)?;
                    let mut y = vec![0.0; yp.len()];
                    for (&i, v) in perm.iter().zip(yp) {
                        y[i] = v;
                    }
                    Ok(y)
                };
                let mut x = lu_solve(b)?;
                for _ in 0..REFINE_STEPS {
                    let r = sub(b, &a.spmv(&x)?);
                    axpy(1.0, &lu_solve(&r)?, &mut x);
                }
                let report = direct_report(a, b, x0, &x, monitor)?;
                (x, report)
            }
            (SolverKind::Fgmres, prep) => {
                fgmres_monitored(a, b, x0, prep.preconditioner(), p.tol, p.max_iters, monitor)?
            }
            (SolverKind::Cgmres, prep) => cgmres_optimised_with(
                a,
                b,
                x0,
                prep.preconditioner(),
                p.tol,
                p.epsilon(),
                p.max_iters,
                &imposed,
                monitor,
                &SqpOptions::default(),
            )?,
            (SolverKind::CgmresProto, prep) => cgmres_prototype_monitored(
                a,
                b,
                x0,
                prep.preconditioner(),
                p.tol,
                p.max_iters,
                &imposed,
                monitor,
                &SqpOptions::default(),
            )?,
            (SolverKind::Direct, _) => unreachable!("direct solves always prepare an LU"),
        };
        Ok(StepSolve {
            x,
            report,
            setup_seconds,
            solve_seconds: start.elapsed().as_secs_f64(),
        })
    }
}

fn direct_report(
    a: &SparseMatrix,
    b: &[f64],
    x0: &[f64],
    x: &[f64],
    monitor: &[QuadraticConstraint],
) -> Result<SolveReport> {
    let r0 = norm2(&sub(b, &a.spmv(x0)?));
    let r = norm2(&sub(b, &a.spmv(x)?));
    let misfits = monitor
        .iter()
        .map(|c| c.evaluate(x))
        .collect::<cgmres_core::Result<Vec<_>>>()?;
    Ok(SolveReport {
        initial_residual: r0,
        residual_history: vec![r],
        constraint_misfit_history: vec![misfits],
        phases: vec![IterationPhase::Unconstrained],
        iterations: 1,
        status: SolveStatus::Converged,
        timings: Default::default(),
        iteration_seconds: vec![0.0],
        reduce_seconds: vec![0.0],
    })
}

/// The starting vector for a step from `z_n`. `previous` is the last solve
/// unknown, used for stage systems.
fn initial_guess(guess: InitialGuess, sys: &StepSystem, z_n: &[f64], previous: Option<&[f64]>) -> Vec<f64> {
    match (guess, &sys.reconstruction) {
        (InitialGuess::Zero, _) => vec![0.0; sys.dim()],
        (InitialGuess::Previous, Reconstruction::Direct) => z_n.to_vec(),
        (InitialGuess::Previous, Reconstruction::Stages { .. }) => match previous {
            Some(p) if p.len() == sys.dim() => p.to_vec(),
            _ => vec![0.0; sys.dim()],
        },
    }
}

fn labels(constraints: &[QuadraticConstraint]) -> Vec<String> {
    constraints.iter().map(|c| c.label().to_string()).collect()
}

#[derive(Debug, Clone)]
pub struct SingleSolveSummary {
    /// Labels of the monitored constraints, in CSV column order.
    pub labels: Vec<String>,
    pub report: SolveReport,
    pub state: Vec<f64>,
}

/// One step from the initial state. Rows: `iteration, residual_norm,
/// misfit_<label>..., phase`, with absolute misfits.
pub fn run_single_solve(
    problem: &dyn Problem,
    dt: f64,
    params: SolveParams,
    out: &mut dyn Write,
) -> Result<SingleSolveSummary> {
    let mut solver = StepSolver::new(params)?;
    let z0 = problem.initial_state();
    let sys = problem.step_system(&z0, dt)?;
    let x0 = initial_guess(solver.params().guess, &sys, &z0, None);
    let solve = solver.solve(&sys, &x0)?;
    let labels = labels(&sys.constraints);

    let mut header = vec!["iteration".to_string(), "residual_norm".to_string()];
    header.extend(labels.iter().map(|l| format!("misfit_{l}")));
    header.push("phase".into());
    let mut csv = CsvWriter::new(out, &header)?;
    let r = &solve.report;
    for i in 0..r.iterations {
        let mut row = vec![(i + 1).to_string(), float(r.residual_history[i])];
        row.extend(r.constraint_misfit_history[i].iter().map(|m| float(m.abs())));
        row.push(r.phases[i].as_str().into());
        csv.row(&row)?;
    }
    csv.flush()?;
    Ok(SingleSolveSummary {
        labels,
        state: sys.state(&solve.x)?,
        report: solve.report,
    })
}

#[derive(Debug, Clone)]
pub struct EvolutionSummary {
    pub labels: Vec<String>,
    /// Signed deviation of each law after each step.
    pub deviations: Vec<Vec<f64>>,
    pub l2_errors: Vec<Option<f64>>,
    pub iterations: Vec<usize>,
    pub failed_constrained_iterations: usize,
    pub all_converged: bool,
    pub final_state: Vec<f64>,
}

impl EvolutionSummary {
    /// Largest absolute deviation of each law over the run.
    pub fn max_deviation(&self) -> Vec<f64> {
        let mut out = vec![0.0f64; self.labels.len()];
        for d in &self.deviations {
            for (m, v) in out.iter_mut().zip(d) {
                *m = m.max(v.abs());
            }
        }
        out
    }

    pub fn max_deviation_of(&self, label: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == label)?;
        Some(self.max_deviation()[i])
    }
}

/// `steps` time steps. Rows: `step, t, dev_<label>..., l2_error,
/// iterations, wall_time`; `l2_error` is empty without an exact solution.
///
/// The deviation of a law is its constraint evaluated at the new state,
/// i.e. the functional minus the value an exact step would give.
pub fn run_evolution(
    problem: &dyn Problem,
    dt: f64,
    steps: usize,
    params: SolveParams,
    out: &mut dyn Write,
) -> Result<EvolutionSummary> {
    let mut solver = StepSolver::new(params)?;
    let mut z = problem.initial_state();
    let labels = labels(&problem.invariants(&z, dt)?);

    let mut header = vec!["step".to_string(), "t".to_string()];
    header.extend(labels.iter().map(|l| format!("dev_{l}")));
    header.extend(["l2_error", "iterations", "wall_time"].map(String::from));
    let mut csv = CsvWriter::new(out, &header)?;

    let mut summary = EvolutionSummary {
        labels,
        deviations: Vec::with_capacity(steps),
        l2_errors: Vec::with_capacity(steps),
        iterations: Vec::with_capacity(steps),
        failed_constrained_iterations: 0,
        all_converged: true,
        final_state: Vec::new(),
    };
    let mut previous: Option<Vec<f64>> = None;
    for step in 1..=steps {
        let start = Instant::now();
        let laws = problem.invariants(&z, dt)?;
        let sys = problem.step_system(&z, dt)?;
        let x0 = initial_guess(solver.params().guess, &sys, &z, previous.as_deref());
        let solve = solver.solve(&sys, &x0).with_context(|| format!("step {step}"))?;
        z = sys.state(&solve.x)?;
        let wall = start.elapsed().as_secs_f64();
        previous = Some(solve.x);

        let t = step as f64 * dt;
        let dev = laws
            .iter()
            .map(|g| g.evaluate(&z))
            .collect::<cgmres_core::Result<Vec<_>>>()?;
        let err = problem.l2_error(&z, t);
        let mut row = vec![step.to_string(), float(t)];
        row.extend(dev.iter().map(|&d| float(d)));
        row.push(err.map(float).unwrap_or_default());
        row.push(solve.report.iterations.to_string());
        row.push(float(wall));
        csv.row(&row)?;

        summary.all_converged &= solve.report.converged();
        summary.failed_constrained_iterations += solve.report.failed_constrained_iterations();
        summary.iterations.push(solve.report.iterations);
        summary.deviations.push(dev);
        summary.l2_errors.push(err);
    }
    csv.flush()?;
    summary.final_state = z;
    Ok(summary)
}

/// One point of a timing sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub size: usize,
    pub unknowns: usize,
    pub t_precond: f64,
    pub t_fgmres: f64,
    pub t_cgmres: f64,
    /// CGMRES iterations.
    pub iterations: usize,
    /// Mean cost of an unconstrained iteration.
    pub t_iter: f64,
    /// Mean cost of reducing the constraints, over constrained iterations.
    pub t_overhead: f64,
    /// Mean total cost of a constrained iteration.
    pub t_itercon: f64,
    pub n_constrained: usize,
    pub converged: bool,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Times FGMRES and CGMRES on the first step of each problem size; the
/// smallest time over `repeats` runs is kept for every column.
///
/// Rows: `size, T_precond, T_fgmres, T_cgmres, iterations, T_iter,
/// T_overhead, T_itercon, n_constrained_iters`, times in seconds.
pub fn run_timing(
    build: &dyn Fn(usize) -> Result<Box<dyn Problem>>,
    sizes: &[usize],
    dt: f64,
    params: SolveParams,
    repeats: usize,
    out: &mut dyn Write,
) -> Result<Vec<TimingRow>> {
    params.validate().map_err(|e| anyhow!(e))?;
    if repeats == 0 {
        bail!("repeats must be at least 1");
    }
    if matches!(params.solver, SolverKind::Direct) {
        bail!("timing sweeps compare iterative solvers; --solver direct is not supported here");
    }
    let header = [
        "size",
        "T_precond",
        "T_fgmres",
        "T_cgmres",
        "iterations",
        "T_iter",
        "T_overhead",
        "T_itercon",
        "n_constrained_iters",
    ]
    .map(String::from);
    let mut csv = CsvWriter::new(out, &header)?;
    let mut rows = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let problem = build(size)?;
        let z0 = problem.initial_state();
        let sys = problem.step_system(&z0, dt)?;
        let mut row = TimingRow {
            size,
            unknowns: sys.dim(),
            t_precond: f64::INFINITY,
            t_fgmres: f64::INFINITY,
            t_cgmres: f64::INFINITY,
            iterations: 0,
            t_iter: f64::INFINITY,
            t_overhead: f64::INFINITY,
            t_itercon: f64::INFINITY,
            n_constrained: 0,
            converged: true,
        };
        for _ in 0..repeats {
            let fg = SolveParams {
                solver: SolverKind::Fgmres,
                ..params.clone()
            };
            let cg = SolveParams {
                solver: SolverKind::Cgmres,
                ..params.clone()
            };
            let mut f = StepSolver::new(fg)?;
            let x0 = initial_guess(params.guess, &sys, &z0, None);
            let fs = f.solve(&sys, &x0)?;
            let mut c = StepSolver::new(cg)?;
            let cs = c.solve(&sys, &x0)?;
            let r = &cs.report;
            let constrained: Vec<usize> = (0..r.iterations)
                .filter(|&i| r.phases[i] != IterationPhase::Unconstrained)
                .collect();
            let t_iter = mean(
                (0..r.iterations)
                    .filter(|i| !constrained.contains(i))
                    .map(|i| r.iteration_seconds[i]),
            );
            let t_overhead = mean(constrained.iter().map(|&i| r.reduce_seconds[i]));
            let t_itercon = mean(
                constrained
                    .iter()
                    .map(|&i| r.iteration_seconds[i] + r.reduce_seconds[i]),
            );

            row.t_precond = row.t_precond.min(fs.setup_seconds.min(cs.setup_seconds));
            row.t_fgmres = row.t_fgmres.min(fs.solve_seconds);
            row.t_cgmres = row.t_cgmres.min(cs.solve_seconds);
            row.t_iter = row.t_iter.min(t_iter);
            row.t_overhead = row.t_overhead.min(t_overhead);
            row.t_itercon = row.t_itercon.min(t_itercon);
            row.iterations = r.iterations;
            row.n_constrained = constrained.len();
            row.converged &= r.converged() && fs.report.converged();
        }
        csv.row(&[
            size.to_string(),
            float(row.t_precond),
            float(row.t_fgmres),
            float(row.t_cgmres),
            row.iterations.to_string(),
            float(row.t_iter),
            float(row.t_overhead),
            float(row.t_itercon),
            row.n_constrained.to_string(),
        ])?;
        rows.push(row);
    }
    csv.flush()?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::SyntheticProblem;

    fn params(solver: SolverKind) -> SolveParams {
        SolveParams {
            solver,
            tol: 1e-10,
            ..Default::default()
        }
    }

    #[test]
    fn unknown_label_is_rejected() {
        let p = SyntheticProblem::new(20, 20, 0).unwrap();
        let mut sp = params(SolverKind::Cgmres);
        sp.order = ConstraintOrder::Labels(vec!["charge".into()]);
        let err = run_single_solve(&p, 0.1, sp, &mut Vec::new()).unwrap_err();
        assert!(err.to_string().contains("charge"));
    }

    #[test]
    fn solvers_agree_on_a_step() {
        let p = SyntheticProblem::new(40, 60, 2).unwrap();
        let states: Vec<Vec<f64>> = [
            SolverKind::Direct,
            SolverKind::Fgmres,
            SolverKind::Cgmres,
            SolverKind::CgmresProto,
        ]
        .into_iter()
        .map(|s| run_single_solve(&p, 0.1, params(s), &mut Vec::new()).unwrap().state)
        .collect();
        for s in &states[1..] {
            let d = sub(s, &states[0]).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(d < 1e-9, "{d}");
        }
    }

    #[test]
    fn evolution_rows_and_deviations() {
        let p = SyntheticProblem::new(30, 40, 5).unwrap();
        let mut buf = Vec::new();
        let s = run_evolution(&p, 0.1, 4, params(SolverKind::Cgmres), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "step,t,dev_mass,dev_energy,l2_error,iterations,wall_time");
        assert_eq!(lines.len(), 5);
        assert!(s.all_converged);
        assert!(s.max_deviation().iter().all(|&d| d < 1e-12));
    }

    #[test]
    fn preconditioner_is_reused_for_a_constant_matrix() {
        let p = SyntheticProblem::new(30, 40, 6).unwrap();
        let mut solver = StepSolver::new(SolveParams {
            precond: PrecondKind::Ilut,
            ..params(SolverKind::Fgmres)
        })
        .unwrap();
        let z = p.initial_state();
        let sys = p.step_system(&z, 0.2).unwrap();
        let first = solver.solve(&sys, &z).unwrap();
        let second = solver.solve(&sys, &first.x).unwrap();
        assert_eq!(second.setup_seconds, 0.0);
        assert!(second.report.converged());
    }
}
