//! Command-line interface.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use cgmres_core::glrk::gauss_legendre_tableau;
use cgmres_problems::heat::{HeatMesh, HeatProblem, HeatSystem};
use cgmres_problems::lkdv::{DgMesh1D, LkdvProblem, TimeScheme};
use cgmres_problems::swe::{SweProblem, SweSystem, TriMeshPeriodic};
use cgmres_problems::Problem;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{ConstraintOrder, InitialGuess, PrecondKind, SolveParams, SolverKind};
use crate::runner::{run_evolution, run_single_solve, run_timing};
use crate::synthetic::SyntheticProblem;

#[derive(Debug, Parser)]
#[command(
    name = "cgmres-bench",
    version,
    about = "Constrained GMRES experiments, written as CSV"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Linear KdV, DG in space, Crank-Nicolson or Gauss-Legendre in time.
    Lkdv(LkdvArgs),
    /// Rotating shallow water on a periodic triangulated square.
    Swe(SweArgs),
    /// Heat equation on the unit square with P1 elements.
    Heat(HeatArgs),
    /// Random skew-symmetric system with mass and energy invariants.
    Synthetic(SyntheticArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scale {
    /// Full-size meshes.
    Paper,
    /// Smaller meshes that run in seconds.
    Desk,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Time step [default: problem dependent]
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long, value_enum, default_value_t = SolverKind::Cgmres)]
    pub solver: SolverKind,
    #[arg(long, value_enum, default_value_t = PrecondKind::None)]
    pub precond: PrecondKind,
    /// Absolute residual tolerance
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Residual gate for cgmres [default: 10 * tol]
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Maximum Krylov iterations per solve
    #[arg(long, default_value_t = 500)]
    pub iters: usize,
    /// Number of time steps; switches to an evolution run
    #[arg(long, conflicts_with = "tend")]
    pub steps: Option<usize>,
    /// Final time; switches to an evolution run
    #[arg(long)]
    pub tend: Option<f64>,
    /// Constraints to impose, in order: `all`, `none`, or labels like `mass,energy`
    #[arg(long, visible_alias = "constraints", default_value = "all", value_parser = ConstraintOrder::parse)]
    pub order: ConstraintOrder,
    #[arg(long, value_enum, default_value_t = InitialGuess::Zero)]
    pub initial_guess: InitialGuess,
    /// Output file [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated mesh sizes; switches to a timing sweep
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Runs per timing point; the fastest is kept
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    #[arg(long, value_enum, default_value_t = Scale::Paper)]
    pub scale: Scale,
    /// ILUT drop tolerance relative to the row norm
    #[arg(long, default_value_t = 1e-4)]
    pub ilut_drop: f64,
    /// ILUT fill factor relative to the row's nonzeros
    #[arg(long, default_value_t = 10.0)]
    pub ilut_fill: f64,
}

#[derive(Debug, Args)]
pub struct LkdvArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Number of elements
    #[arg(long, default_value_t = 50)]
    pub elements: usize,
    /// Polynomial degree
    #[arg(long, default_value_t = 1)]
    pub degree: usize,
    /// Gauss-Legendre stages; 0 selects Crank-Nicolson
    #[arg(long, default_value_t = 0)]
    pub stages: usize,
    /// Domain length
    #[arg(long, default_value_t = 10.0)]
    pub length: f64,
    /// Wavenumber of the initial data sin(alpha x) + 1 [default: pi/5]
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Squares per side [default: 50, or 32 with --scale desk]
    #[arg(long)]
    pub elements: Option<usize>,
    /// Domain side length
    #[arg(long, default_value_t = 40.0)]
    pub length: f64,
    /// Coriolis parameter
    #[arg(long, default_value_t = 0.1)]
    pub coriolis: f64,
    /// Squared wave speed
    #[arg(long, default_value_t = 1.0)]
    pub c2: f64,
}

#[derive(Debug, Args)]
pub struct HeatArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Squares per side [default: 50, or 32 with --scale desk]
    #[arg(long)]
    pub elements: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SyntheticArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Number of unknowns
    #[arg(long, default_value_t = 200)]
    pub size: usize,
    /// Random 3-cycles in the generator [default: 2 * size]
    #[arg(long)]
    pub cycles: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

type Builder = Box<dyn Fn(usize) -> Result<Box<dyn Problem>>>;

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Lkdv(a) => &a.common,
            Command::Swe(a) => &a.common,
            Command::Heat(a) => &a.common,
            Command::Synthetic(a) => &a.common,
        }
    }

    fn default_dt(&self) -> f64 {
        match self {
            Command::Lkdv(_) | Command::Heat(_) => 0.01,
            Command::Swe(_) | Command::Synthetic(_) => 0.1,
        }
    }

    fn default_size(&self) -> usize {
        let desk = self.common().scale == Scale::Desk;
        match self {
            Command::Lkdv(a) => a.elements,
            Command::Swe(a) => a.elements.unwrap_or(if desk { 32 } else { 50 }),
            Command::Heat(a) => a.elements.unwrap_or(if desk { 32 } else { 50 }),
            Command::Synthetic(a) => a.size,
        }
    }

    /// Builds the problem at a given size (elements, squares per side, or
    /// unknowns).
    fn builder(&self) -> Result<Builder> {
        Ok(match self {
            Command::Lkdv(a) => {
                let scheme = match a.stages {
                    0 => TimeScheme::CrankNicolson,
                    s => TimeScheme::Gauss(gauss_legendre_tableau(s)?),
                };
                let (length, degree, alpha) = (a.length, a.degree, a.alpha.unwrap_or(PI / 5.0));
                Box::new(move |m| {
                    let mesh = DgMesh1D::new(length, m, degree)?;
                    Ok(Box::new(LkdvProblem::travelling_wave(mesh, scheme.clone(), alpha)?) as Box<dyn Problem>)
                })
            }
            Command::Swe(a) => {
                let (length, f, c2) = (a.length, a.coriolis, a.c2);
                Box::new(move |m| {
                    let sys = SweSystem::new(TriMeshPeriodic::new(length, length, m)?, f, c2)?;
                    Ok(Box::new(SweProblem::gaussian(sys)?) as Box<dyn Problem>)
                })
            }
            Command::Heat(_) => Box::new(|m| {
                let sys = HeatSystem::new(HeatMesh::new(m)?);
                Ok(Box::new(HeatProblem::polynomial(sys)?) as Box<dyn Problem>)
            }),
            Command::Synthetic(a) => {
                let (cycles, seed) = (a.cycles, a.seed);
                Box::new(move |n| {
                    let p = SyntheticProblem::new(n, cycles.unwrap_or(2 * n), seed)?;
                    Ok(Box::new(p) as Box<dyn Problem>)
                })
            }
        })
    }
}

impl CommonArgs {
    pub fn solve_params(&self) -> SolveParams {
        SolveParams {
            solver: self.solver,
            precond: self.precond,
            tol: self.tol,
            epsilon: self.epsilon,
            max_iters: self.iters,
            ilut_drop: self.ilut_drop,
            ilut_fill: self.ilut_fill,
            order: self.order.clone(),
            guess: self.initial_guess,
        }
    }

    fn steps(&self, dt: f64) -> Result<Option<usize>> {
        match (self.steps, self.tend) {
            (Some(s), _) => Ok(Some(s)),
            (None, Some(t)) => {
                let n = t / dt;
                if !(n.is_finite() && n >= 0.0) || (n - n.round()).abs() > 1e-9 * n.max(1.0) {
                    bail!("--tend {t} is not a whole number of steps of size {dt}");
                }
                Ok(Some(n.round() as usize))
            }
            (None, None) => Ok(None),
        }
    }
}

/// Runs the command and reports whether every solve converged.
pub fn run(cli: &Cli) -> Result<bool> {
    let cmd = &cli.command;
    let common = cmd.common();
    let dt = common.dt.unwrap_or_else(|| cmd.default_dt());
    if !(dt.is_finite() && dt > 0.0) {
        bail!("--dt must be positive, got {dt}");
    }
    let params = common.solve_params();
    params.validate().map_err(anyhow::Error::msg)?;
    let build = cmd.builder()?;

    let mut out: Box<dyn Write> = match &common.out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };

    let converged = if let Some(sizes) = &common.sizes {
        if sizes.is_empty() {
            bail!("--sizes needs at least one value");
        }
        let rows = run_timing(&*build, sizes, dt, params, common.repeats, &mut out)?;
        rows.iter().all(|r| r.converged)
    } else {
        let problem = build(cmd.default_size())?;
        match common.steps(dt)? {
            Some(steps) => run_evolution(&*problem, dt, steps, params, &mut out)?.all_converged,
            None => run_single_solve(&*problem, dt, params, &mut out)?.report.converged(),
        }
    };
    out.flush()?;
    Ok(converged)
}
