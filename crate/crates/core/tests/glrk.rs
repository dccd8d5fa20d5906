use cgmres_core::glrk::{assemble_stage_system, gauss_legendre_tableau, reconstruct};
use cgmres_core::linalg::{dense_lu_solve, dot, DenseMatrix, SparseMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn step(f: &SparseMatrix, z: &[f64], dt: f64, s: usize) -> Vec<f64> {
    let tab = gauss_legendre_tableau(s).unwrap();
    let e = SparseMatrix::identity(z.len());
    let sys = assemble_stage_system(&e, f, &vec![0.0; z.len()], z, dt, &tab).unwrap();
    let k = dense_lu_solve(&sys.matrix.to_dense(), &sys.rhs).unwrap();
    reconstruct(z, dt, &tab, &k).unwrap()
}

fn oscillator() -> SparseMatrix {
    SparseMatrix::from_dense(&DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap())
}

#[test]
fn two_stage_tableau_is_analytic() {
    let t = gauss_legendre_tableau(2).unwrap();
    let r = 3f64.sqrt() / 6.0;
    assert!((t.c[0] - (0.5 - r)).abs() <= 1e-14);
    assert!((t.c[1] - (0.5 + r)).abs() <= 1e-14);
    assert!((t.b[0] - 0.5).abs() <= 1e-14 && (t.b[1] - 0.5).abs() <= 1e-14);
    let expected = [[0.25, 0.25 - r], [0.25 + r, 0.25]];
    for i in 0..2 {
        for j in 0..2 {
            assert!((t.a[(i, j)] - expected[i][j]).abs() <= 1e-14);
        }
    }
}

#[test]
fn order_conditions_and_row_sums() {
    for s in 1..=10 {
        let t = gauss_legendre_tableau(s).unwrap();
        assert!((t.b.iter().sum::<f64>() - 1.0).abs() <= 1e-14);
        for w in t.c.windows(2) {
            assert!(w[0] < w[1]);
        }
        assert!(t.c[0] > 0.0 && t.c[s - 1] < 1.0);
        for k in 1..=2 * s {
            let q: f64 = t.b.iter().zip(&t.c).map(|(b, c)| b * c.powi(k as i32 - 1)).sum();
            assert!((q - 1.0 / k as f64).abs() <= 1e-12, "s={s} k={k}");
        }
        for i in 0..s {
            let row: f64 = (0..s).map(|j| t.a[(i, j)]).sum();
            assert!((row - t.c[i]).abs() <= 1e-13);
        }
    }
}

#[test]
fn quadratic_invariant_preserved_for_skew_systems() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = 6;
    let mut d = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = rng.gen_range(-1.0..1.0);
            d[(i, j)] = v;
            d[(j, i)] = -v;
        }
    }
    let f = SparseMatrix::from_dense(&d);
    let z0: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    for s in 1..=3 {
        let mut z = z0.clone();
        for _ in 0..20 {
            z = step(&f, &z, 0.3, s);
        }
        assert!((dot(&z, &z) - dot(&z0, &z0)).abs() <= 1e-12 * dot(&z0, &z0), "s={s}");
    }
}

#[test]
fn rotation_one_step_error_is_fourth_order() {
    let f = oscillator();
    let z0 = [1.0, 0.0];
    let err = |dt: f64| {
        let z = step(&f, &z0, dt, 2);
        ((z[0] - dt.cos()).powi(2) + (z[1] + dt.sin()).powi(2)).sqrt()
    };
    let (e1, e2) = (err(0.2), err(0.1));
    assert!(e1 < 0.2f64.powi(4));
    assert!(e1 / e2 > 2f64.powi(4));
}

#[test]
fn oscillator_global_order() {
    let f = oscillator();
    for s in 1..=2 {
        let errs: Vec<f64> = [0.1f64, 0.05, 0.025]
            .iter()
            .map(|&dt| {
                let steps = (1.0 / dt).round() as usize;
                let mut z = vec![1.0, 0.0];
                for _ in 0..steps {
                    z = step(&f, &z, dt, s);
                }
                ((z[0] - 1f64.cos()).powi(2) + (z[1] + 1f64.sin()).powi(2)).sqrt()
            })
            .collect();
        for w in errs.windows(2) {
            let slope = (w[0] / w[1]).log2();
            assert!((slope - 2.0 * s as f64).abs() <= 0.2, "s={s} slope={slope}");
        }
    }
}
