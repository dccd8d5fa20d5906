//! Linear KdV, `u_t + u_x + u_xxx = 0`, written as the first-order system
//! `u_t + v_x = 0`, `v = u + w_x`, `w = u_x` on a periodic interval and
//! discretised with discontinuous Galerkin elements and central fluxes.
//!
//! Unknowns are nodal coefficients stacked as `z = [U; V; W]`. All time
//! stepping matrices are in strong (mass-inverted) form.

use cgmres_core::constraints::QuadraticConstraint;
use cgmres_core::glrk::{assemble_stage_system_dae, ButcherTableau, StageSystem};
use cgmres_core::linalg::{norm_inf, DenseMatrix, LuFactor, SparseMatrix, TripletBuilder};
use cgmres_core::quadrature::{gauss_legendre, gauss_lobatto_nodes, lagrange_basis, lagrange_derivatives};

use crate::{check_dim, Problem, ProblemError, Reconstruction, Result, StepSystem};

/// Largest `‖W - G U‖∞` accepted as consistent initial data.
pub const CONSISTENCY_TOL: f64 = 1e-10;

/// Quadrature points per element used for projecting and measuring smooth
/// functions (beyond the exact rules used for assembly).
const SMOOTH_QUAD_EXTRA: usize = 8;

/// Uniform periodic mesh of `[0, length)` with `elements` cells carrying
/// degree-`degree` nodal polynomials at Gauss-Lobatto points.
#[derive(Debug, Clone, PartialEq)]
pub struct DgMesh1D {
    length: f64,
    elements: usize,
    degree: usize,
    nodes: Vec<f64>,
}

impl DgMesh1D {
    pub fn new(length: f64, elements: usize, degree: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(ProblemError::InvalidMesh(format!(
                "domain length must be positive, got {length}"
            )));
        }
        if elements == 0 {
            return Err(ProblemError::InvalidMesh("at least one element is required".into()));
        }
        let nodes = if degree == 0 {
            vec![0.0]
        } else {
            gauss_lobatto_nodes(degree + 1)
        };
        Ok(Self {
            length,
            elements,
            degree,
            nodes,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn elements(&self) -> usize {
        self.elements
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn h(&self) -> f64 {
        self.length / self.elements as f64
    }

    pub fn nodes_per_element(&self) -> usize {
        self.degree + 1
    }

    /// Dimension of the scalar DG space, `(q + 1) M`.
    pub fn dofs(&self) -> usize {
        self.nodes_per_element() * self.elements
    }

    /// Reference nodes on `[-1, 1]`.
    pub fn reference_nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn dof(&self, element: usize, local: usize) -> usize {
        element * self.nodes_per_element() + local
    }

    /// Physical position of reference coordinate `xi` in `element`.
    pub fn map(&self, element: usize, xi: f64) -> f64 {
        let h = self.h();
        element as f64 * h + 0.5 * h * (xi + 1.0)
    }

    pub fn node_positions(&self) -> Vec<f64> {
        (0..self.elements)
            .flat_map(|m| self.nodes.iter().map(move |&xi| (m, xi)))
            .map(|(m, xi)| self.map(m, xi))
            .collect()
    }

    /// The element to the left of `element`, wrapping periodically.
    pub fn left_neighbour(&self, element: usize) -> usize {
        (element + self.elements - 1) % self.elements
    }

    /// Evaluates a scalar DG field inside `element` at reference point `xi`.
    pub fn evaluate(&self, coeffs: &[f64], element: usize, xi: f64) -> f64 {
        let base = self.dof(element, 0);
        lagrange_basis(&self.nodes, xi)
            .iter()
            .zip(&coeffs[base..base + self.nodes_per_element()])
            .map(|(p, c)| p * c)
            .sum()
    }
}

#[derive(Debug, Clone)]
struct Reference {
    mass: DenseMatrix,
    /// `∫ φ_i φ_j'` on `[-1, 1]`.
    deriv: DenseMatrix,
    left: Vec<f64>,
    right: Vec<f64>,
}

impl Reference {
    fn new(nodes: &[f64]) -> Self {
        let p = nodes.len();
        let (xq, wq) = gauss_legendre(p + 1);
        let mut mass = DenseMatrix::zeros(p, p);
        let mut deriv = DenseMatrix::zeros(p, p);
        for (&x, &w) in xq.iter().zip(&wq) {
            let phi = lagrange_basis(nodes, x);
            let dphi = lagrange_derivatives(nodes, x);
            for i in 0..p {
                for j in 0..p {
                    mass[(i, j)] += w * phi[i] * phi[j];
                    deriv[(i, j)] += w * phi[i] * dphi[j];
                }
            }
        }
        Self {
            mass,
            deriv,
            left: lagrange_basis(nodes, -1.0),
            right: lagrange_basis(nodes, 1.0),
        }
    }
}

/// Spatial operators of the DG discretisation.
#[derive(Debug, Clone)]
pub struct LkdvSystem {
    mesh: DgMesh1D,
    reference: Reference,
    mass_inv: DenseMatrix,
    mass: SparseMatrix,
    flux_form: SparseMatrix,
    derivative: SparseMatrix,
}

impl LkdvSystem {
    pub fn new(mesh: DgMesh1D) -> Result<Self> {
        let reference = Reference::new(mesh.reference_nodes());
        let p = mesh.nodes_per_element();
        let n = mesh.dofs();
        let half_h = 0.5 * mesh.h();

        let lu = LuFactor::new(&reference.mass)?;
        let mut mass_inv = DenseMatrix::zeros(p, p);
        for j in 0..p {
            let mut e = vec![0.0; p];
            e[j] = 1.0;
            for (i, v) in lu.solve(&e)?.into_iter().enumerate() {
                mass_inv[(i, j)] = v / half_h;
            }
        }

        let mut mass = TripletBuilder::with_capacity(n, n, n * p);
        let mut flux = TripletBuilder::with_capacity(n, n, 3 * n * p);
        for m in 0..mesh.elements() {
            for i in 0..p {
                for j in 0..p {
                    mass.push(mesh.dof(m, i), mesh.dof(m, j), half_h * reference.mass[(i, j)]);
                    flux.push(mesh.dof(m, i), mesh.dof(m, j), reference.deriv[(i, j)]);
                }
            }
            // face at the left end of element m; the minus side is the
            // right end of the left neighbour
            let l = mesh.left_neighbour(m);
            let jumps = (0..p)
                .map(|j| (mesh.dof(l, j), reference.right[j]))
                .chain((0..p).map(|j| (mesh.dof(m, j), -reference.left[j])));
            let jumps: Vec<_> = jumps.filter(|&(_, v)| v != 0.0).collect();
            let averages = (0..p)
                .map(|i| (mesh.dof(l, i), 0.5 * reference.right[i]))
                .chain((0..p).map(|i| (mesh.dof(m, i), 0.5 * reference.left[i])));
            for (row, avg) in averages.filter(|&(_, v)| v != 0.0) {
                for &(col, jump) in &jumps {
                    flux.push(row, col, -jump * avg);
                }
            }
        }
        let mass = mass.build();
        let flux_form = flux.build();

        let mut g = TripletBuilder::with_capacity(n, n, 3 * n * p);
        for m in 0..mesh.elements() {
            for k in 0..p {
                let (cols, vals) = flux_form.row(mesh.dof(m, k));
                for i in 0..p {
                    let w = mass_inv[(i, k)];
                    for (&c, &v) in cols.iter().zip(vals) {
                        g.push(mesh.dof(m, i), c, w * v);
                    }
                }
            }
        }

        Ok(Self {
            mesh,
            reference,
            mass_inv,
            mass,
            flux_form,
            derivative: g.build(),
        })
    }

    pub fn mesh(&self) -> &DgMesh1D {
        &self.mesh
    }

    /// Scalar DG mass matrix (block diagonal).
    pub fn mass(&self) -> &SparseMatrix {
        &self.mass
    }

    /// `B_ij = Σ_m ∫ φ_j' φ_i − [φ_j]{φ_i}`, so that `B = M G`.
    pub fn flux_form(&self) -> &SparseMatrix {
        &self.flux_form
    }

    /// The discrete derivative `G = M⁻¹ B`.
    pub fn derivative(&self) -> &SparseMatrix {
        &self.derivative
    }

    /// Scalar space dimension.
    pub fn dofs(&self) -> usize {
        self.mesh.dofs()
    }

    /// Dimension of the stacked state `[U; V; W]`.
    pub fn state_dim(&self) -> usize {
        3 * self.dofs()
    }

    /// L2 projection of `u` onto the scalar DG space.
    pub fn project(&self, u: impl Fn(f64) -> f64) -> Vec<f64> {
        let p = self.mesh.nodes_per_element();
        let half_h = 0.5 * self.mesh.h();
        let (xq, wq) = gauss_legendre(p + SMOOTH_QUAD_EXTRA);
        let basis: Vec<Vec<f64>> = xq
            .iter()
            .map(|&x| lagrange_basis(self.mesh.reference_nodes(), x))
            .collect();
        let mut coeffs = vec![0.0; self.dofs()];
        let mut rhs = vec![0.0; p];
        for m in 0..self.mesh.elements() {
            rhs.iter_mut().for_each(|r| *r = 0.0);
            for ((&x, &w), phi) in xq.iter().zip(&wq).zip(&basis) {
                let val = half_h * w * u(self.mesh.map(m, x));
                for (r, ph) in rhs.iter_mut().zip(phi) {
                    *r += val * ph;
                }
            }
            for i in 0..p {
                coeffs[self.mesh.dof(m, i)] = (0..p).map(|k| self.mass_inv[(i, k)] * rhs[k]).sum();
            }
        }
        coeffs
    }

    /// `‖U − u‖_{L2}` for a scalar field `U`.
    pub fn l2_error(&self, coeffs: &[f64], u: impl Fn(f64) -> f64) -> f64 {
        let half_h = 0.5 * self.mesh.h();
        let (xq, wq) = gauss_legendre(self.mesh.nodes_per_element() + SMOOTH_QUAD_EXTRA);
        let mut acc = 0.0;
        for m in 0..self.mesh.elements() {
            for (&x, &w) in xq.iter().zip(&wq) {
                let e = self.mesh.evaluate(coeffs, m, x) - u(self.mesh.map(m, x));
                acc += half_h * w * e * e;
            }
        }
        acc.sqrt()
    }

    /// `[U; U + G W; W]` with `W = G U`, which satisfies both algebraic
    /// relations of the system.
    pub fn consistent_state(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_dim("LkdvSystem::consistent_state", self.dofs(), u.len())?;
        let w = self.derivative.spmv(u)?;
        let gw = self.derivative.spmv(&w)?;
        let v: Vec<f64> = u.iter().zip(&gw).map(|(a, b)| a + b).collect();
        let mut z = u.to_vec();
        z.extend(v);
        z.extend(w);
        Ok(z)
    }

    /// `‖W − G U‖∞` for a stacked state.
    pub fn consistency_residual(&self, z: &[f64]) -> Result<f64> {
        check_dim("LkdvSystem::consistency_residual", self.state_dim(), z.len())?;
        let n = self.dofs();
        let gu = self.derivative.spmv(&z[..n])?;
        Ok(norm_inf(
            &gu.iter().zip(&z[2 * n..]).map(|(a, b)| a - b).collect::<Vec<_>>(),
        ))
    }

    fn embed(&self, block: usize, m: &SparseMatrix, scale: f64) -> SparseMatrix {
        let n = self.dofs();
        let mut b = TripletBuilder::new(3 * n, 3 * n);
        b.add_matrix(block * n, block * n, m, scale);
        b.build()
    }

    /// `ω(u)`: integrals of the `U` basis functions, zero elsewhere.
    pub fn mass_weights(&self) -> Vec<f64> {
        let n = self.dofs();
        let mut w = vec![0.0; 3 * n];
        for (i, _, v) in self.mass.triplets() {
            w[i] += v;
        }
        w
    }

    /// `M(u)` in the stacked space.
    pub fn mass_u(&self) -> SparseMatrix {
        self.embed(0, &self.mass, 1.0)
    }

    /// `M(w)` in the stacked space.
    pub fn mass_w(&self) -> SparseMatrix {
        self.embed(2, &self.mass, 1.0)
    }

    /// Mass, momentum and energy as constraints `g(z) − g(z0) = 0`.
    pub fn constraints(&self, z0: &[f64]) -> Result<Vec<QuadraticConstraint>> {
        let residual = self.consistency_residual(z0)?;
        if !(residual <= CONSISTENCY_TOL) {
            return Err(ProblemError::Consistency {
                what: "W0 must equal G U0",
                residual,
            });
        }
        let n = self.dofs();
        let z = 3 * n;
        let mass = QuadraticConstraint::linear(self.mass_weights(), 0.0, "mass");
        let momentum = QuadraticConstraint::new(&self.embed(0, &self.mass, 0.5), vec![0.0; z], 0.0, "momentum")?;
        let mut energy_m = TripletBuilder::new(z, z);
        energy_m.add_matrix(2 * n, 2 * n, &self.mass, 0.5);
        energy_m.add_matrix(0, 0, &self.mass, -0.5);
        let energy = QuadraticConstraint::new(&energy_m.build(), vec![0.0; z], 0.0, "energy")?;

        [mass, momentum, energy]
            .into_iter()
            .map(|c| {
                let target = c.evaluate(z0)?;
                Ok(c.with_constant(-target))
            })
            .collect()
    }

    /// Crank-Nicolson step in the unknown `[U^{n+1}; V; W^{n+1}]`:
    ///
    /// ```text
    /// U^{n+1} + dt G V                 = U^n
    /// V − ½U^{n+1} − ½G W^{n+1}        = ½U^n + ½G W^n
    /// W^{n+1} − G U^{n+1}              = 0
    /// ```
    pub fn assemble_cn_step(&self, z_n: &[f64], dt: f64) -> Result<(SparseMatrix, Vec<f64>)> {
        check_dim("LkdvSystem::assemble_cn_step", self.state_dim(), z_n.len())?;
        check_step(dt)?;
        let n = self.dofs();
        let g = &self.derivative;
        let eye = SparseMatrix::identity(n);
        let mut a = TripletBuilder::with_capacity(3 * n, 3 * n, 3 * n + 3 * g.nnz());
        a.add_matrix(0, 0, &eye, 1.0);
        a.add_matrix(0, n, g, dt);
        a.add_matrix(n, 0, &eye, -0.5);
        a.add_matrix(n, n, &eye, 1.0);
        a.add_matrix(n, 2 * n, g, -0.5);
        a.add_matrix(2 * n, 0, g, -1.0);
        a.add_matrix(2 * n, 2 * n, &eye, 1.0);

        let u = &z_n[..n];
        let gw = g.spmv(&z_n[2 * n..])?;
        let mut f = u.to_vec();
        f.extend(u.iter().zip(&gw).map(|(a, b)| 0.5 * (a + b)));
        f.extend(std::iter::repeat_n(0.0, n));
        Ok((a.build(), f))
    }

    /// The semi-discrete system `E ż = F z` and its algebraic-row mask.
    pub fn semi_discrete(&self) -> (SparseMatrix, SparseMatrix, Vec<bool>) {
        let n = self.dofs();
        let g = &self.derivative;
        let eye = SparseMatrix::identity(n);
        let mut e = TripletBuilder::new(3 * n, 3 * n);
        e.add_matrix(0, 0, &eye, 1.0);
        let mut f = TripletBuilder::new(3 * n, 3 * n);
        f.add_matrix(0, n, g, -1.0);
        f.add_matrix(n, 0, &eye, 1.0);
        f.add_matrix(n, n, &eye, -1.0);
        f.add_matrix(n, 2 * n, g, 1.0);
        f.add_matrix(2 * n, 0, g, 1.0);
        f.add_matrix(2 * n, 2 * n, &eye, -1.0);
        let mask = (0..3 * n).map(|i| i >= n).collect();
        (e.build(), f.build(), mask)
    }

    /// Gauss-Legendre stage system for one step, with `constraints` lifted
    /// to the stacked stage derivatives.
    pub fn assemble_glrk_step(
        &self,
        z_n: &[f64],
        dt: f64,
        tableau: &ButcherTableau,
        constraints: &[QuadraticConstraint],
    ) -> Result<(StageSystem, Vec<QuadraticConstraint>)> {
        check_dim("LkdvSystem::assemble_glrk_step", self.state_dim(), z_n.len())?;
        check_step(dt)?;
        let (e, f, mask) = self.semi_discrete();
        let g = vec![0.0; self.state_dim()];
        let sys = assemble_stage_system_dae(&e, &f, &g, z_n, dt, tableau, &mask)?;
        let lifted = constraints
            .iter()
            .map(|c| c.lift_through_affine(z_n, dt, &tableau.b))
            .collect::<cgmres_core::Result<Vec<_>>>()?;
        Ok((sys, lifted))
    }

    /// Reference-element endpoint values, `(φ(-1), φ(1))`.
    pub fn trace_values(&self) -> (&[f64], &[f64]) {
        (&self.reference.left, &self.reference.right)
    }
}

/// The DG derivative `G` with central fluxes on a periodic mesh.
pub fn dg_derivative_operator(mesh: &DgMesh1D) -> Result<SparseMatrix> {
    Ok(LkdvSystem::new(mesh.clone())?.derivative)
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

#[derive(Debug, Clone)]
pub enum TimeScheme {
    CrankNicolson,
    Gauss(ButcherTableau),
}

type ExactFn = Box<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// An lKdV run: operators, time scheme, initial state and fixed targets.
pub struct LkdvProblem {
    system: LkdvSystem,
    scheme: TimeScheme,
    z0: Vec<f64>,
    constraints: Vec<QuadraticConstraint>,
    exact: Option<ExactFn>,
}

impl LkdvProblem {
    /// Projects `u0`, builds the consistent state and fixes the targets.
    pub fn new(system: LkdvSystem, scheme: TimeScheme, u0: impl Fn(f64) -> f64) -> Result<Self> {
        let u = system.project(u0);
        let z0 = system.consistent_state(&u)?;
        Self::from_state(system, scheme, z0)
    }

    pub fn from_state(system: LkdvSystem, scheme: TimeScheme, z0: Vec<f64>) -> Result<Self> {
        let constraints = system.constraints(&z0)?;
        Ok(Self {
            system,
            scheme,
            z0,
            constraints,
            exact: None,
        })
    }

    /// `u(t, x) = sin(α(x − (1 − α²)t)) + 1`, an exact solution on any
    /// domain that is a whole number of wavelengths.
    pub fn travelling_wave(mesh: DgMesh1D, scheme: TimeScheme, alpha: f64) -> Result<Self> {
        let system = LkdvSystem::new(mesh)?;
        let mut p = Self::new(system, scheme, move |x| (alpha * x).sin() + 1.0)?;
        let speed = 1.0 - alpha * alpha;
        p.exact = Some(Box::new(move |t, x| (alpha * (x - speed * t)).sin() + 1.0));
        Ok(p)
    }

    pub fn system(&self) -> &LkdvSystem {
        &self.system
    }

    pub fn scheme(&self) -> &TimeScheme {
        &self.scheme
    }

    pub fn constraints(&self) -> &[QuadraticConstraint] {
        &self.constraints
    }
}

impl Problem for LkdvProblem {
    fn name(&self) -> &'static str {
        "lkdv"
    }

    fn state_dim(&self) -> usize {
        self.system.state_dim()
    }

    fn initial_state(&self) -> Vec<f64> {
        self.z0.clone()
    }

    fn invariants(&self, _z_prev: &[f64], _dt: f64) -> Result<Vec<QuadraticConstraint>> {
        Ok(self.constraints.clone())
    }

    fn step_system(&self, z_n: &[f64], dt: f64) -> Result<StepSystem> {
        match &self.scheme {
            TimeScheme::CrankNicolson => {
                let (matrix, rhs) = self.system.assemble_cn_step(z_n, dt)?;
                Ok(StepSystem {
                    matrix,
                    rhs,
                    constraints: self.constraints.clone(),
                    reconstruction: Reconstruction::Direct,
                })
            }
            TimeScheme::Gauss(tableau) => {
                let (sys, constraints) = self.system.assemble_glrk_step(z_n, dt, tableau, &self.constraints)?;
                Ok(StepSystem {
                    matrix: sys.matrix,
                    rhs: sys.rhs,
                    constraints,
                    reconstruction: Reconstruction::Stages {
                        z_n: z_n.to_vec(),
                        dt,
                        tableau: tableau.clone(),
                    },
                })
            }
        }
    }

    fn l2_error(&self, z: &[f64], t: f64) -> Option<f64> {
        let exact = self.exact.as_ref()?;
        let n = self.system.dofs();
        Some(self.system.l2_error(&z[..n], |x| exact(t, x)))
    }
}
