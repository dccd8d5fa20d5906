//! Heat equation `u_t = Δu` on the unit square with Neumann conditions,
//! continuous P1 elements and Crank-Nicolson stepping.

use cgmres_core::constraints::QuadraticConstraint;
use cgmres_core::krylov::fgmres;
use cgmres_core::linalg::{norm2, SparseMatrix, TripletBuilder};
use cgmres_core::preconditioners::Jacobi;
use cgmres_core::quadrature::gauss_legendre;

use crate::{check_dim, Problem, ProblemError, Reconstruction, Result, StepSystem};

/// Points per direction of the collapsed (Duffy) rule used for projections.
const PROJECTION_POINTS: usize = 8;

/// Structured P1 triangulation of `[0, 1]²`: `M × M` squares, each split
/// along its lower-left to upper-right diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatMesh {
    m: usize,
}

impl HeatMesh {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(ProblemError::InvalidMesh("need at least one cell per side".into()));
        }
        Ok(Self { m })
    }

    pub fn cells_per_side(&self) -> usize {
        self.m
    }

    pub fn h(&self) -> f64 {
        1.0 / self.m as f64
    }

    pub fn node_count(&self) -> usize {
        (self.m + 1) * (self.m + 1)
    }

    pub fn node(&self, i: usize, j: usize) -> usize {
        i + j * (self.m + 1)
    }

    pub fn position(&self, node: usize) -> [f64; 2] {
        let w = self.m + 1;
        [(node % w) as f64 * self.h(), (node / w) as f64 * self.h()]
    }

    /// Vertex triples of every triangle, counter-clockwise.
    pub fn triangles(&self) -> Vec<[usize; 3]> {
        let mut t = Vec::with_capacity(2 * self.m * self.m);
        for j in 0..self.m {
            for i in 0..self.m {
                let (a, b, c, d) = (
                    self.node(i, j),
                    self.node(i + 1, j),
                    self.node(i + 1, j + 1),
                    self.node(i, j + 1),
                );
                t.push([a, b, c]);
                t.push([a, c, d]);
            }
        }
        t
    }
}

/// Mass and stiffness matrices of the P1 space.
#[derive(Debug, Clone)]
pub struct HeatSystem {
    mesh: HeatMesh,
    mass: SparseMatrix,
    stiffness: SparseMatrix,
    weights: Vec<f64>,
}

impl HeatSystem {
    pub fn new(mesh: HeatMesh) -> Self {
        let n = mesh.node_count();
        let tris = mesh.triangles();
        let mut mb = TripletBuilder::with_capacity(n, n, 9 * tris.len());
        let mut kb = TripletBuilder::with_capacity(n, n, 9 * tris.len());
        for t in &tris {
            let p = t.map(|v| mesh.position(v));
            let area = 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
            // ∇φ_i = (y_{i+1} − y_{i+2}, x_{i+2} − x_{i+1}) / (2|T|)
            let grad: Vec<[f64; 2]> = (0..3)
                .map(|i| {
                    let (a, b) = (p[(i + 1) % 3], p[(i + 2) % 3]);
                    [(a[1] - b[1]) / (2.0 * area), (b[0] - a[0]) / (2.0 * area)]
                })
                .collect();
            for i in 0..3 {
                for j in 0..3 {
                    let m = if i == j { area / 6.0 } else { area / 12.0 };
                    mb.push(t[i], t[j], m);
                    kb.push(t[i], t[j], area * (grad[i][0] * grad[j][0] + grad[i][1] * grad[j][1]));
                }
            }
        }
        let mass = mb.build();
        let stiffness = kb.build();
        let mut weights = vec![0.0; n];
        for (i, _, v) in mass.triplets() {
            weights[i] += v;
        }
        Self {
            mesh,
            mass,
            stiffness,
            weights,
        }
    }

    pub fn mesh(&self) -> &HeatMesh {
        &self.mesh
    }

    pub fn state_dim(&self) -> usize {
        self.mesh.node_count()
    }

    pub fn mass(&self) -> &SparseMatrix {
        &self.mass
    }

    pub fn stiffness(&self) -> &SparseMatrix {
        &self.stiffness
    }

    /// `ω = M 1`, the integrals of the basis functions.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Load vector `∫ u φ_i`, integrated with a collapsed Gauss rule.
    pub fn load(&self, u: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let (xg, wg) = gauss_legendre(PROJECTION_POINTS);
        let mut b = vec![0.0; self.state_dim()];
        for t in self.mesh.triangles() {
            let p = t.map(|v| self.mesh.position(v));
            let jac = ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1])).abs();
            for (xa, wa) in xg.iter().zip(&wg) {
                let s = 0.5 * (xa + 1.0);
                for (xb, wb) in xg.iter().zip(&wg) {
                    // (s, r) on the unit square maps to (s, r(1 − s)) on the reference triangle
                    let r = 0.5 * (xb + 1.0) * (1.0 - s);
                    let w = 0.25 * wa * wb * (1.0 - s) * jac;
                    let lam = [1.0 - s - r, s, r];
                    let x = lam[0] * p[0][0] + lam[1] * p[1][0] + lam[2] * p[2][0];
                    let y = lam[0] * p[0][1] + lam[1] * p[1][1] + lam[2] * p[2][1];
                    let val = w * u(x, y);
                    for k in 0..3 {
                        b[t[k]] += val * lam[k];
                    }
                }
            }
        }
        b
    }

    /// L2 projection `M⁻¹ load(u)`.
    pub fn project(&self, u: impl Fn(f64, f64) -> f64) -> Result<Vec<f64>> {
        let b = self.load(u);
        let n = self.state_dim();
        let tol = 1e-14 * norm2(&b);
        let (c, report) = fgmres(
            &self.mass,
            &b,
            &vec![0.0; n],
            &Jacobi::new(&self.mass)?,
            tol,
            n.min(400),
        )?;
        if !report.converged() && report.final_residual() > 1e-12 * norm2(&b) {
            return Err(ProblemError::InvalidParameter(format!(
                "projection did not converge (residual {:e})",
                report.final_residual()
            )));
        }
        Ok(c)
    }

    /// Crank-Nicolson step `(M + dt/2 L) z^{n+1} = (M − dt/2 L) z^n`.
    pub fn assemble_heat_cn(&self, z_n: &[f64], dt: f64) -> Result<(SparseMatrix, Vec<f64>)> {
        check_dim("HeatSystem::assemble_heat_cn", self.state_dim(), z_n.len())?;
        check_step(dt)?;
        let a = self.mass.linear_combination(1.0, &self.stiffness, 0.5 * dt)?;
        let rhs = self
            .mass
            .linear_combination(1.0, &self.stiffness, -0.5 * dt)?
            .spmv(z_n)?;
        Ok((a, rhs))
    }

    /// `ωᵀz = mass_target`.
    pub fn mass_constraint(&self, mass_target: f64) -> QuadraticConstraint {
        QuadraticConstraint::linear(self.weights.clone(), -mass_target, "mass")
    }

    /// The one-step dissipation law as a constraint on `z^{n+1}`:
    /// `½zᵀMz + (dt/4) zᵀLz + (dt/2) zᵀL z_n = ½z_nᵀM z_n − (dt/4) z_nᵀL z_n`.
    pub fn dissipation_constraint(&self, z_n: &[f64], dt: f64) -> Result<QuadraticConstraint> {
        check_dim("HeatSystem::dissipation_constraint", self.state_dim(), z_n.len())?;
        check_step(dt)?;
        let m = self.mass.linear_combination(0.5, &self.stiffness, 0.25 * dt)?;
        let mut v = self.stiffness.spmv(z_n)?;
        v.iter_mut().for_each(|x| *x *= 0.5 * dt);
        let c = -(0.5 * self.mass.quadratic_form(z_n)? - 0.25 * dt * self.stiffness.quadratic_form(z_n)?);
        Ok(QuadraticConstraint::new(&m, v, c, "dissipation")?)
    }

    /// `[mass, dissipation]` for a step from `z_n`.
    pub fn constraints(&self, mass_target: f64, z_n: &[f64], dt: f64) -> Result<Vec<QuadraticConstraint>> {
        Ok(vec![
            self.mass_constraint(mass_target),
            self.dissipation_constraint(z_n, dt)?,
        ])
    }
}

fn check_step(dt: f64) -> Result<()> {
    if dt.is_finite() && dt > 0.0 {
        Ok(())
    } else {
        Err(ProblemError::InvalidParameter(format!(
            "time step must be positive, got {dt}"
        )))
    }
}

/// `10³ [(x(x − 1))⁵ + y(y − 1)⁶]`.
pub fn polynomial_initial_data(x: f64, y: f64) -> f64 {
    1e3 * ((x * (x - 1.0)).powi(5) + y * (y - 1.0).powi(6))
}

/// A heat run; the mass target is fixed, the dissipation law is rebuilt
/// from the previous state every step.
#[derive(Debug, Clone)]
pub struct HeatProblem {
    system: HeatSystem,
    z0: Vec<f64>,
    mass_target: f64,
}

impl HeatProblem {
    pub fn new(system: HeatSystem, z0: Vec<f64>) -> Result<Self> {
        check_dim("HeatProblem::new", system.state_dim(), z0.len())?;
        let mass_target = system.weights().iter().zip(&z0).map(|(w, z)| w * z).sum();
        Ok(Self {
            system,
            z0,
            mass_target,
        })
    }

    /// The projected polynomial initial data.
    pub fn polynomial(system: HeatSystem) -> Result<Self> {
        let z0 = system.project(polynomial_initial_data)?;
        Self::new(system, z0)
    }

    pub fn system(&self) -> &HeatSystem {
        &self.system
    }

    pub fn mass_target(&self) -> f64 {
        self.mass_target
    }
}

impl Problem for HeatProblem {
    fn name(&self) -> &'static str {
        "heat"
    }

    fn state_dim(&self) -> usize {
        self.system.state_dim()
    }

    fn initial_state(&self) -> Vec<f64> {
        self.z0.clone()
    }

    fn invariants(&self, z_prev: &[f64], dt: f64) -> Result<Vec<QuadraticConstraint>> {
        self.system.constraints(self.mass_target, z_prev, dt)
    }

    fn step_system(&self, z_n: &[f64], dt: f64) -> Result<StepSystem> {
        let (matrix, rhs) = self.system.assemble_heat_cn(z_n, dt)?;
        Ok(StepSystem {
            matrix,
            rhs,
            constraints: self.invariants(z_n, dt)?,
            reconstruction: Reconstruction::Direct,
        })
    }
}
