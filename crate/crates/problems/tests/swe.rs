mod common;

use cgmres_core::krylov::fgmres;
use cgmres_core::linalg::dot;
use cgmres_core::preconditioners::{Identity, Ilut};
use cgmres_problems::swe::{coriolis_perp_matrix, SweProblem, SweSystem, TriMeshPeriodic};
use cgmres_problems::Problem;
use common::{exact_step, max_abs_diff};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn gaussian_problem(m: usize, f: f64) -> SweProblem {
    SweProblem::gaussian(SweSystem::new(TriMeshPeriodic::new(40.0, 40.0, m).unwrap(), f, 1.0).unwrap()).unwrap()
}

#[test]
fn divergence_matches_boundary_fluxes() {
    let mesh = TriMeshPeriodic::new(3.0, 2.0, 5).unwrap();
    let sys = SweSystem::new(mesh.clone(), 0.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let u: Vec<f64> = (0..mesh.edge_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let du = sys.divergence().spmv(&u).unwrap();
    for (t, tri) in mesh.triangles().iter().enumerate() {
        // ∫_T ∇·U = Σ_edges |e| U·n_out, with U·n constant along each edge
        let mids = tri.edge_midpoints();
        let mut flux = 0.0;
        for k in 0..3 {
            let a = tri.vertices[(k + 1) % 3];
            let b = tri.vertices[(k + 2) % 3];
            let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            let mut n = [(b[1] - a[1]) / len, -(b[0] - a[0]) / len];
            if (mids[k][0] - tri.vertices[k][0]) * n[0] + (mids[k][1] - tri.vertices[k][1]) * n[1] < 0.0 {
                n = [-n[0], -n[1]];
            }
            let v = mesh.velocity(&u, t, mids[k]);
            flux += len * (v[0] * n[0] + v[1] * n[1]);
        }
        assert!((du[t] - flux).abs() < 1e-12, "triangle {t}");
    }
}

#[test]
fn divergence_of_shared_edge_cancels() {
    let sys = SweSystem::new(TriMeshPeriodic::new(1.0, 1.0, 4).unwrap(), 0.0, 1.0).unwrap();
    let ones = vec![1.0; sys.pressure_dofs()];
    let col_sums = sys.divergence().tr_spmv(&ones).unwrap();
    assert!(col_sums.iter().all(|v| v.abs() < 1e-14));
}

#[test]
fn coriolis_is_skew() {
    let mesh = TriMeshPeriodic::new(40.0, 40.0, 8).unwrap();
    let c = coriolis_perp_matrix(&mesh);
    let sum = c.linear_combination(1.0, &c.transpose(), 1.0).unwrap();
    assert!(sum.norm_inf() <= 1e-12 * c.norm_inf());
}

#[test]
fn coriolis_on_constant_fields() {
    let mesh = TriMeshPeriodic::new(4.0, 3.0, 6).unwrap();
    let sys = SweSystem::new(mesh.clone(), 0.1, 1.0).unwrap();
    let e1 = mesh.interpolate_velocity(|_, _| [1.0, 0.0]);
    let e2 = mesh.interpolate_velocity(|_, _| [0.0, 1.0]);
    // constants are reproduced exactly by the interpolant
    for t in 0..mesh.triangles().len() {
        let v = mesh.velocity(&e1, t, mesh.triangles()[t].centroid());
        assert!((v[0] - 1.0).abs() < 1e-13 && v[1].abs() < 1e-13);
    }
    let area = 12.0;
    let ce1 = sys.coriolis().spmv(&e1).unwrap();
    assert!(dot(&ce1, &e1).abs() < 1e-12);
    // e1^⊥ = e2, so (C e1)·e2 = ∫ e2·e2
    assert!((dot(&ce1, &e2) - area).abs() < 1e-12);
    let f_scaled = sys.coriolis_parameter() * dot(&ce1, &e2);
    assert!((f_scaled - 0.1 * area).abs() < 1e-12);
    // and the mass matrix integrates |e1|²
    assert!((sys.mass_u().quadratic_form(&e1).unwrap() - area).abs() < 1e-12);
}

#[test]
fn zero_state_stays_zero() {
    let sys = SweSystem::new(TriMeshPeriodic::new(40.0, 40.0, 4).unwrap(), 0.1, 1.0).unwrap();
    let p = SweProblem::new(sys, vec![0.0; 80]).unwrap();
    let z1 = exact_step(&p.step_system(&p.initial_state(), 0.1).unwrap());
    assert!(z1.iter().all(|&v| v == 0.0));
    for g in p.constraints() {
        assert_eq!(g.evaluate(&z1).unwrap(), 0.0);
    }
}

#[test]
fn exact_step_conserves_with_and_without_rotation() {
    for f in [0.0, 0.1] {
        let p = gaussian_problem(6, f);
        let z0 = p.initial_state();
        let z1 = exact_step(&p.step_system(&z0, 0.1).unwrap());
        assert!(max_abs_diff(&z0, &z1) > 1e-3);
        for g in p.constraints() {
            let scale = g.functional(&z0).unwrap().abs();
            assert!(
                g.evaluate(&z1).unwrap().abs() <= 1e-11 * scale.max(1.0),
                "f={f} {}",
                g.label()
            );
        }
    }
}

#[test]
fn hundred_step_exact_evolution() {
    let p = gaussian_problem(32, 0.1);
    let z0 = p.initial_state();
    let step = p.step_system(&z0, 0.1).unwrap();
    // the CN matrix is the same every step
    let lu = Ilut::exact(&step.matrix).unwrap();
    assert_eq!(lu.shifted_pivots(), 0);
    let sys = p.system();
    let scales: Vec<f64> = p
        .constraints()
        .iter()
        .map(|g| g.functional(&z0).unwrap().abs())
        .collect();
    let mut z = z0;
    let mut drift = [0.0f64; 2];
    for _ in 0..100 {
        let (_, rhs) = sys.assemble_swe_cn(&z, 0.1).unwrap();
        z = lu.solve(&rhs).unwrap();
        for (d, g) in drift.iter_mut().zip(p.constraints()) {
            *d = d.max(g.evaluate(&z).unwrap().abs());
        }
    }
    assert!(drift[0] <= 1e-11 * scales[0], "mass drift {}", drift[0]);
    assert!(drift[1] <= 1e-10 * scales[1], "energy drift {}", drift[1]);
}

#[test]
fn previous_step_guess_conserves_mass_on_uniform_mesh() {
    let p = gaussian_problem(16, 0.1);
    let mut z = p.initial_state();
    let mass = &p.constraints()[0];
    let scale = mass.functional(&z).unwrap();
    for _ in 0..10 {
        let step = p.step_system(&z, 0.1).unwrap();
        let (x, report) = fgmres(&step.matrix, &step.rhs, &z, &Identity::new(z.len()), 1e-6, 200).unwrap();
        assert!(report.converged());
        z = x;
        assert!(mass.evaluate(&z).unwrap().abs() <= 1e-14 * scale);
    }
}
