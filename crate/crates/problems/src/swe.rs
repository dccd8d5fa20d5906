//! Linear rotating shallow water on a doubly periodic rectangle:
//! `u_t + f u^⊥ + c² ∇ρ = 0`, `ρ_t + ∇·u = 0`.
//!
//! Velocity lives in lowest-order Raviart-Thomas space (one normal flux
//! per edge), pressure in piecewise constants. The state is `z = [U; ρ]`.

use cgmres_core::constraints::QuadraticConstraint;
use cgmres_core::linalg::{SparseMatrix, TripletBuilder};

use crate::{check_dim, Problem, ProblemError, Reconstruction, Result, StepSystem};

/// One triangle; local edge `k` is opposite local vertex `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Triangle {
    /// Vertex coordinates, unwrapped so the triangle is geometrically intact.
    pub vertices: [[f64; 2]; 3],
    pub edges: [usize; 3],
    /// `+1` where the global edge normal points out of this triangle.
    pub signs: [f64; 3],
    pub area: f64,
}

impl Triangle {
    /// Edge midpoints, which double as a degree-2 quadrature rule with
    /// weights `area / 3`.
    pub fn edge_midpoints(&self) -> [[f64; 2]; 3] {
        let v = &self.vertices;
        let mid = |a: usize, b: usize| [0.5 * (v[a][0] + v[b][0]), 0.5 * (v[a][1] + v[b][1])];
        [mid(1, 2), mid(2, 0), mid(0, 1)]
    }

    pub fn centroid(&self) -> [f64; 2] {
        let v = &self.vertices;
        [(v[0][0] + v[1][0] + v[2][0]) / 3.0, (v[0][1] + v[1][1] + v[2][1]) / 3.0]
    }
}

/// An `M × M` grid of rectangles on `[0, X) × [0, Y)`, each split along its
/// lower-left to upper-right diagonal, with periodic identification.
///
/// Edges are numbered horizontal (bottom of each cell), then vertical (left
/// of each cell), then diagonal. Global normals are `+y`, `+x` and
/// `(h_y, −h_x)/|d|` respectively.
#[derive(Debug, Clone)]
pub struct TriMeshPeriodic {
    lx: f64,
    ly: f64,
    m: usize,
    triangles: Vec<Triangle>,
}

impl TriMeshPeriodic {
    pub fn new(lx: f64, ly: f64, m: usize) -> Result<Self> {
        if !(lx.is_finite() && lx > 0.0 && ly.is_finite() && ly > 0.0) {
            return Err(ProblemError::InvalidMesh(format!(
                "extents must be positive, got {lx} x {ly}"
            )));
        }
        // with one cell per side the two diagonals of a cell coincide
        if m < 2 {
            return Err(ProblemError::InvalidMesh(format!(
                "need at least 2 cells per side, got {m}"
            )));
        }
        let hx = lx / m as f64;
        let hy = ly / m as f64;
        let mm = m * m;
        let cell = |i: usize, j: usize| (i % m) + (j % m) * m;
        let normals = edge_normals(hx, hy);
        let normal_of = |e: usize| normals[e / mm];

        let mut triangles = Vec::with_capacity(2 * mm);
        for j in 0..m {
            for i in 0..m {
                let x0 = i as f64 * hx;
                let y0 = j as f64 * hy;
                let p00 = [x0, y0];
                let p10 = [x0 + hx, y0];
                let p11 = [x0 + hx, y0 + hy];
                let p01 = [x0, y0 + hy];
                let h = |a: usize, b: usize| cell(a, b);
                let v = |a: usize, b: usize| mm + cell(a, b);
                let d = 2 * mm + cell(i, j);
                let lower = ([p00, p10, p11], [v(i + 1, j), d, h(i, j)]);
                let upper = ([p00, p11, p01], [h(i, j + 1), v(i, j), d]);
                for (vertices, edges) in [lower, upper] {
                    let mut t = Triangle {
                        vertices,
                        edges,
                        signs: [0.0; 3],
                        area: 0.5 * hx * hy,
                    };
                    let mids = t.edge_midpoints();
                    for k in 0..3 {
                        let n = normal_of(edges[k]);
                        let out = (mids[k][0] - vertices[k][0]) * n[0] + (mids[k][1] - vertices[k][1]) * n[1];
                        t.signs[k] = out.signum();
                    }
                    triangles.push(t);
                }
            }
        }
        Ok(Self { lx, ly, m, triangles })
    }

    pub fn extents(&self) -> (f64, f64) {
        (self.lx, self.ly)
    }

    pub fn cells_per_side(&self) -> usize {
        self.m
    }

    pub fn vertex_count(&self) -> usize {
        self.m * self.m
    }

    pub fn edge_count(&self) -> usize {
        3 * self.m * self.m
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let hx = self.lx / self.m as f64;
        let hy = self.ly / self.m as f64;
        match e / (self.m * self.m) {
            0 => hx,
            1 => hy,
            _ => hx.hypot(hy),
        }
    }

    /// `V − E + F`, zero on a torus.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertex_count() as i64 - self.edge_count() as i64 + self.triangles.len() as i64
    }

    /// The triangles adjacent to each edge.
    pub fn edge_triangles(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.edge_count()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &e in &tri.edges {
                adj[e].push(t);
            }
        }
        adj
    }

    /// Checks that every edge borders two triangles with opposite
    /// orientation signs.
    pub fn check_conforming(&self) -> Result<()> {
        for (e, ts) in self.edge_triangles().iter().enumerate() {
            if ts.len() != 2 {
                return Err(ProblemError::InvalidMesh(format!(
                    "edge {e} borders {} triangles",
                    ts.len()
                )));
            }
            let sign = |t: usize| {
                let tri = &self.triangles[t];
                tri.signs[tri.edges.iter().position(|&x| x == e).expect("edge listed")]
            };
            if sign(ts[0]) + sign(ts[1]) != 0.0 {
                return Err(ProblemError::InvalidMesh(format!(
                    "edge {e} has inconsistent orientation"
                )));
            }
        }
        Ok(())
    }

    /// The Raviart-Thomas basis function of local edge `k` at `x`.
    pub fn basis(&self, t: usize, k: usize, x: [f64; 2]) -> [f64; 2] {
        let tri = &self.triangles[t];
        let s = tri.signs[k] * self.edge_length(tri.edges[k]) / (2.0 * tri.area);
        let p = tri.vertices[k];
        [s * (x[0] - p[0]), s * (x[1] - p[1])]
    }

    /// Divergence of the basis function of local edge `k` (constant).
    pub fn basis_divergence(&self, t: usize, k: usize) -> f64 {
        let tri = &self.triangles[t];
        tri.signs[k] * self.edge_length(tri.edges[k]) / tri.area
    }

    /// Velocity of an RT coefficient vector inside triangle `t`.
    pub fn velocity(&self, coeffs: &[f64], t: usize, x: [f64; 2]) -> [f64; 2] {
        let mut u = [0.0; 2];
        for k in 0..3 {
            let phi = self.basis(t, k, x);
            let c = coeffs[self.triangles[t].edges[k]];
            u[0] += c * phi[0];
            u[1] += c * phi[1];
        }
        u
    }

    /// RT interpolant: each coefficient is the normal component of `u` at
    /// the edge midpoint (exact for fields in the space, e.g. constants).
    pub fn interpolate_velocity(&self, u: impl Fn(f64, f64) -> [f64; 2]) -> Vec<f64> {
        let mut coeffs = vec![0.0; self.edge_count()];
        let mm = self.m * self.m;
        let normals = edge_normals(self.lx / self.m as f64, self.ly / self.m as f64);
        for tri in &self.triangles {
            let mids = tri.edge_midpoints();
            for k in 0..3 {
                let e = tri.edges[k];
                let n = normals[e / mm];
                let v = u(mids[k][0], mids[k][1]);
                coeffs[e] = v[0] * n[0] + v[1] * n[1];
            }
        }
        coeffs
    }

    /// Piecewise-constant projection using the edge-midpoint rule.
    pub fn project_scalar(&self, rho: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.triangles
            .iter()
            .map(|t| t.edge_midpoints().iter().map(|p| rho(p[0], p[1])).sum::<f64>() / 3.0)
            .collect()
    }
}

/// Unit normals of the horizontal, vertical and diagonal edge families.
fn edge_normals(hx: f64, hy: f64) -> [[f64; 2]; 3] {
    let d = hx.hypot(hy);
    [[0.0, 1.0], [1.0, 0.0], [hy / d, -hx / d]]
}

fn perp(v: [f64; 2]) -> [f64; 2] {
    [-v[1], v[0]]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Assembled operators of the mixed discretisation.
#[derive(Debug, Clone)]
pub struct SweSystem {
    mesh: TriMeshPeriodic,
    coriolis_f: f64,
    c2: f64,
    mass_u: SparseMatrix,
    mass_rho: SparseMatrix,
    coriolis: SparseMatrix,
    divergence: SparseMatrix,
}

impl SweSystem {
    pub fn new(mesh: TriMeshPeriodic, f: f64, c2: f64) -> Result<Self> {
        if !(f.is_finite() && c2.is_finite() && c2 > 0.0) {
            return Err(ProblemError::InvalidParameter(format!(
                "need finite f and positive c², got f={f}, c²={c2}"
            )));
        }
        mesh.check_conforming()?;
        let nu = mesh.edge_count();
        let nt = mesh.triangles().len();
        let mut mu = TripletBuilder::with_capacity(nu, nu, 9 * nt);
        let mut div = TripletBuilder::with_capacity(nt, nu, 3 * nt);
        let mut rho = TripletBuilder::with_capacity(nt, nt, nt);
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let w = tri.area / 3.0;
            let pts = tri.edge_midpoints();
            let phis: Vec<[[f64; 2]; 3]> = pts
                .iter()
                .map(|&p| [mesh.basis(t, 0, p), mesh.basis(t, 1, p), mesh.basis(t, 2, p)])
                .collect();
            for a in 0..3 {
                for b in 0..3 {
                    let m: f64 = phis.iter().map(|phi| w * dot(phi[a], phi[b])).sum();
                    mu.push(tri.edges[a], tri.edges[b], m);
                }
                div.push(t, tri.edges[a], mesh.basis_divergence(t, a) * tri.area);
            }
            rho.push(t, t, tri.area);
        }
        let coriolis = coriolis_perp_matrix(&mesh);
        Ok(Self {
            mesh,
            coriolis_f: f,
            c2,
            mass_u: mu.build(),
            mass_rho: rho.build(),
            coriolis,
            divergence: div.build(),
        })
    }

    pub fn mesh(&self) -> &TriMeshPeriodic {
        &self.mesh
    }

    pub fn coriolis_parameter(&self) -> f64 {
        self.coriolis_f
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    pub fn velocity_dofs(&self) -> usize {
        self.mesh.edge_count()
    }

    pub fn pressure_dofs(&self) -> usize {
        self.mesh.triangles().len()
    }

    pub fn state_dim(&self) -> usize {
        self.velocity_dofs() + self.pressure_dofs()
    }

    pub fn mass_u(&self) -> &SparseMatrix {
        &self.mass_u
    }

    pub fn mass_rho(&self) -> &SparseMatrix {
        &self.mass_rho
    }

    /// `C_ab = ∫ φ_b^⊥ · φ_a` (without the factor `f`).
    pub fn coriolis(&self) -> &SparseMatrix {
        &self.coriolis
    }

    /// `D_{T,e} = ∫_T ∇·φ_e`, pressure rows by velocity columns.
    pub fn divergence(&self) -> &SparseMatrix {
        &self.divergence
    }

    /// `ω(ρ)` in the stacked space.
    pub fn mass_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.velocity_dofs()];
        w.extend(self.mass_rho.diagonal());
        w
    }

    pub fn state(&self, u: &[f64], rho: &[f64]) -> Result<Vec<f64>> {
        check_dim("SweSystem::state (velocity)", self.velocity_dofs(), u.len())?;
        check_dim("SweSystem::state (pressure)", self.pressure_dofs(), rho.len())?;
        let mut z = u.to_vec();
        z.extend_from_slice(rho);
        Ok(z)
    }

    /// Mass and energy as constraints `g(z) − g(z0) = 0`.
    pub fn constraints(&self, z0: &[f64]) -> Result<Vec<QuadraticConstraint>> {
        check_dim("SweSystem::constraints", self.state_dim(), z0.len())?;
        let n = self.state_dim();
        let nu = self.velocity_dofs();
        let mass = QuadraticConstraint::linear(self.mass_weights(), 0.0, "mass");
        let mut em = TripletBuilder::new(n, n);
        em.add_matrix(0, 0, &self.mass_u, 0.5);
        em.add_matrix(nu, nu, &self.mass_rho, 0.5 * self.c2);
        let energy = QuadraticConstraint::new(&em.build(), vec![0.0; n], 0.0, "energy")?;
        [mass, energy]
            .into_iter()
            .map(|c| {
                let target = c.evaluate(z0)?;
                Ok(c.with_constant(-target))
            })
            .collect()
    }

    /// Crank-Nicolson step
    /// `[M_u + (dt f/2) C, −(dt c²/2) Dᵀ; (dt/2) D, M_ρ] z^{n+1}
    ///  = [M_u − (dt f/2) C, (dt c²/2) Dᵀ; −(dt/2) D, M_ρ] z^n`.
    pub fn assemble_swe_cn(&self, z_n: &[f64], dt: f64) -> Result<(SparseMatrix, Vec<f64>)> {
        check_dim("SweSystem::assemble_swe_cn", self.state_dim(), z_n.len())?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(ProblemError::InvalidParameter(format!(
                "time step must be positive, got {dt}"
            )));
        }
        let lhs = self.cn_matrix(0.5 * dt)?;
        let rhs = self.cn_matrix(-0.5 * dt)?.spmv(z_n)?;
        Ok((lhs, rhs))
    }

    fn cn_matrix(&self, half_dt: f64) -> Result<SparseMatrix> {
        let n = self.state_dim();
        let nu = self.velocity_dofs();
        let dt_t = self.divergence.transpose();
        let cap = self.mass_u.nnz() + self.coriolis.nnz() + 2 * self.divergence.nnz() + self.pressure_dofs();
        let mut a = TripletBuilder::with_capacity(n, n, cap);
        a.add_matrix(0, 0, &self.mass_u, 1.0);
        a.add_matrix(0, 0, &self.coriolis, half_dt * self.coriolis_f);
        a.add_matrix(0, nu, &dt_t, -half_dt * self.c2);
        a.add_matrix(nu, 0, &self.divergence, half_dt);
        a.add_matrix(nu, nu, &self.mass_rho, 1.0);
        Ok(a.build())
    }
}

/// Galerkin matrix of `(u^⊥, φ)` over the Raviart-Thomas basis, rows
/// indexed by the test function.
pub fn coriolis_perp_matrix(mesh: &TriMeshPeriodic) -> SparseMatrix {
    let n = mesh.edge_count();
    let mut c = TripletBuilder::with_capacity(n, n, 9 * mesh.triangles().len());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let w = tri.area / 3.0;
        for p in tri.edge_midpoints() {
            let phi = [mesh.basis(t, 0, p), mesh.basis(t, 1, p), mesh.basis(t, 2, p)];
            for a in 0..3 {
                for b in 0..3 {
                    c.push(tri.edges[a], tri.edges[b], w * dot(perp(phi[b]), phi[a]));
                }
            }
        }
    }
    c.build()
}

/// A shallow-water run with fixed mass and energy targets.
#[derive(Debug, Clone)]
pub struct SweProblem {
    system: SweSystem,
    z0: Vec<f64>,
    constraints: Vec<QuadraticConstraint>,
}

impl SweProblem {
    pub fn new(system: SweSystem, z0: Vec<f64>) -> Result<Self> {
        let constraints = system.constraints(&z0)?;
        Ok(Self {
            system,
            z0,
            constraints,
        })
    }

    /// At rest with pressure `10 exp(−|x − x_c|² / 20²)`, `x_c = (20, 20)`.
    pub fn gaussian(system: SweSystem) -> Result<Self> {
        let rho = system
            .mesh()
            .project_scalar(|x, y| 10.0 * (-((x - 20.0).powi(2) + (y - 20.0).powi(2)) / 400.0).exp());
        let z0 = system.state(&vec![0.0; system.velocity_dofs()], &rho)?;
        Self::new(system, z0)
    }

    pub fn system(&self) -> &SweSystem {
        &self.system
    }

    pub fn constraints(&self) -> &[QuadraticConstraint] {
        &self.constraints
    }
}

impl Problem for SweProblem {
    fn name(&self) -> &'static str {
        "swe"
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
        let (matrix, rhs) = self.system.assemble_swe_cn(z_n, dt)?;
        Ok(StepSystem {
            matrix,
            rhs,
            constraints: self.constraints.clone(),
            reconstruction: Reconstruction::Direct,
        })
    }
}
