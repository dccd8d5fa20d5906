//! Brute-force minimisers of `½‖βe₁ − Hy‖²` over the feasible set of one
//! or two quadratic constraints in one or two variables.

use cgmres_core::constraints::ReducedConstraint;
use cgmres_core::linalg::DenseMatrix;

pub struct Case {
    pub name: &'static str,
    pub h: DenseMatrix,
    pub beta: f64,
    pub constraints: Vec<ReducedConstraint>,
}

fn rows(r: &[&[f64]]) -> DenseMatrix {
    DenseMatrix::from_rows(&r.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

fn c1(g: f64, lin: f64, g0: f64) -> ReducedConstraint {
    ReducedConstraint::new(rows(&[&[g]]), vec![lin], g0).unwrap()
}

/// `g11 y1² + 2 g12 y1 y2 + g22 y2² + l1 y1 + l2 y2 + g0`.
fn c2(g11: f64, g12: f64, g22: f64, l1: f64, l2: f64, g0: f64) -> ReducedConstraint {
    ReducedConstraint::new(rows(&[&[g11, g12], &[g12, g22]]), vec![l1, l2], g0).unwrap()
}

pub fn cases() -> Vec<Case> {
    let h2 = rows(&[&[1.0, 0.2], &[0.3, 2.0], &[0.0, 0.1]]);
    let h2b = rows(&[&[2.0, -0.5], &[0.4, 1.0], &[0.0, 0.7]]);
    vec![
        Case {
            name: "two roots",
            h: rows(&[&[2.0], &[1.0]]),
            beta: 1.0,
            constraints: vec![c1(1.0, -3.0, 2.0)],
        },
        Case {
            name: "linear in one variable",
            h: rows(&[&[1.5], &[0.5]]),
            beta: 2.0,
            constraints: vec![c1(0.0, 3.0, -1.0)],
        },
        Case {
            name: "roots either side",
            h: rows(&[&[1.0], &[2.0]]),
            beta: 3.0,
            constraints: vec![c1(4.0, 0.0, -1.0)],
        },
        Case {
            name: "negative start",
            h: rows(&[&[1.0], &[0.5]]),
            beta: -2.0,
            constraints: vec![c1(1.0, 0.5, -5.0)],
        },
        Case {
            name: "circle",
            h: h2.clone(),
            beta: 1.0,
            constraints: vec![c2(1.0, 0.0, 1.0, 0.0, 0.0, -0.5)],
        },
        Case {
            name: "ellipse",
            h: h2b.clone(),
            beta: 1.5,
            constraints: vec![c2(2.0, 0.0, 1.0, 1.0, 0.0, -3.0)],
        },
        Case {
            name: "line and circle",
            h: h2.clone(),
            beta: 1.0,
            constraints: vec![c2(0.0, 0.0, 0.0, 1.0, 1.0, -1.0), c2(1.0, 0.0, 1.0, 0.0, 0.0, -2.0)],
        },
        Case {
            name: "hyperbola",
            h: h2b.clone(),
            beta: 1.0,
            constraints: vec![c2(0.0, 0.5, 0.0, 0.0, 0.0, -1.0)],
        },
        Case {
            name: "two circles",
            h: h2b,
            beta: 0.8,
            constraints: vec![c2(1.0, 0.0, 1.0, -2.0, 0.0, -3.0), c2(1.0, 0.0, 1.0, 0.0, -2.0, -3.0)],
        },
        Case {
            name: "parabola",
            h: h2,
            beta: 2.0,
            constraints: vec![c2(1.0, 0.0, 0.0, 0.0, -1.0, 0.0)],
        },
    ]
}

pub fn objective(case: &Case, y: &[f64]) -> f64 {
    let hy = case.h.matvec(y).unwrap();
    let mut s = 0.0;
    for (i, v) in hy.iter().enumerate() {
        let e = if i == 0 { case.beta } else { 0.0 };
        s += (e - v) * (e - v);
    }
    0.5 * s
}

fn grad_objective(case: &Case, y: &[f64]) -> Vec<f64> {
    let mut r = case.h.matvec(y).unwrap();
    r[0] -= case.beta;
    case.h.tr_matvec(&r).unwrap()
}

/// The global minimiser.
pub fn brute_force(case: &Case) -> Vec<f64> {
    let points = match case.h.ncols() {
        1 => feasible_1d(case),
        2 if case.constraints.len() == 1 => stationary_on_curve(case),
        2 => intersections(case),
        n => panic!("no brute force for {n} variables"),
    };
    points
        .into_iter()
        .min_by(|a, b| objective(case, a).total_cmp(&objective(case, b)))
        .expect("feasible set is empty")
}

fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 {
        return if b == 0.0 { vec![] } else { vec![-c / b] };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return vec![];
    }
    // stable form
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let mut r = vec![q / a];
    if q != 0.0 {
        r.push(c / q);
    }
    r.sort_by(f64::total_cmp);
    r
}

fn feasible_1d(case: &Case) -> Vec<Vec<f64>> {
    let first = &case.constraints[0];
    quadratic_roots(first.g_mat[(0, 0)], first.g[0], first.g0)
        .into_iter()
        .filter(|&y| case.constraints.iter().all(|c| c.evaluate(&[y]).unwrap().abs() < 1e-12))
        .map(|y| vec![y])
        .collect()
}

/// Point on branch `k` of `c` at free coordinate `t`, where `axis` is the
/// index of the free coordinate.
fn branch(c: &ReducedConstraint, axis: usize, t: f64, k: usize) -> Option<[f64; 2]> {
    let (f, d) = (axis, 1 - axis);
    let a = c.g_mat[(d, d)];
    let b = 2.0 * c.g_mat[(f, d)] * t + c.g[d];
    let cc = c.g_mat[(f, f)] * t * t + c.g[f] * t + c.g0;
    let roots = quadratic_roots(a, b, cc);
    let s = *roots.get(if roots.len() == 1 { 0 } else { k })?;
    if roots.len() == 1 && k == 1 {
        return None;
    }
    let mut p = [0.0; 2];
    p[f] = t;
    p[d] = s;
    Some(p)
}

const SPAN: f64 = 6.0;
const GRID: usize = 200_000;

fn grid(i: usize) -> f64 {
    -SPAN + 2.0 * SPAN * i as f64 / GRID as f64
}

/// Bisects a sign change of `g` on `[lo, hi]` down to adjacent floats.
fn bisect(g: impl Fn(f64) -> Option<f64>, mut lo: f64, mut hi: f64) -> Option<f64> {
    let glo = g(lo)?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid)?;
        if (gm > 0.0) == (glo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Stationary points of the objective along every branch of the curve,
/// parametrised by either coordinate.
fn stationary_on_curve(case: &Case) -> Vec<Vec<f64>> {
    let c = &case.constraints[0];
    let mut out = Vec::new();
    for axis in 0..2 {
        for k in 0..2 {
            // derivative of the objective along the branch
            let slope = |t: f64| -> Option<f64> {
                let p = branch(c, axis, t, k)?;
                let gf = grad_objective(case, &p);
                let gc = c.jacobian(&p).unwrap();
                let (f, d) = (axis, 1 - axis);
                if gc[d].abs() < 1e-9 {
                    return None;
                }
                Some(gf[f] - gf[d] * gc[f] / gc[d])
            };
            let mut prev: Option<(f64, f64)> = None;
            for i in 0..=GRID {
                let t = grid(i);
                let s = slope(t);
                if let (Some((tp, sp)), Some(s)) = (prev, s) {
                    if sp < 0.0 && s >= 0.0 {
                        if let Some(t) = bisect(slope, tp, t) {
                            if let Some(p) = branch(c, axis, t, k) {
                                out.push(p.to_vec());
                            }
                        }
                    }
                }
                prev = s.map(|s| (t, s));
            }
        }
    }
    out
}

/// Points of the first curve where the second constraint vanishes.
fn intersections(case: &Case) -> Vec<Vec<f64>> {
    let (c1, c2) = (&case.constraints[0], &case.constraints[1]);
    let mut out = Vec::new();
    for axis in 0..2 {
        for k in 0..2 {
            let other = |t: f64| branch(c1, axis, t, k).map(|p| c2.evaluate(&p).unwrap());
            let mut prev: Option<(f64, f64)> = None;
            for i in 0..=GRID {
                let t = grid(i);
                let v = other(t);
                if let (Some((tp, vp)), Some(v)) = (prev, v) {
                    if (vp > 0.0) != (v > 0.0) {
                        if let Some(t) = bisect(other, tp, t) {
                            if let Some(p) = branch(c1, axis, t, k) {
                                out.push(p.to_vec());
                            }
                        }
                    }
                }
                prev = v.map(|v| (t, v));
            }
        }
    }
    out
}
