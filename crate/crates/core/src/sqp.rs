//! Small dense equality-constrained least squares:
//!
//! ```text
//! min_y ½‖βe₁ − H y‖²   subject to   yᵀGᵢy + gᵢᵀy + g0ᵢ = 0,  i = 1..k
//! ```
//!
//! solved by Newton's method on the KKT conditions (an equality-only SQP
//! with exact Hessian), Levenberg damping and a backtracking line search.

use crate::constraints::ReducedConstraint;
use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, norm2, norm_inf, qr_lstsq, DenseMatrix, LuFactor};

/// Weight of the constraint residual in the merit function.
const MERIT_RHO: f64 = 10.0;
/// Iterations without a 10% reduction in the constraint residual before
/// the problem is declared infeasible.
const STALL_WINDOW: usize = 8;
const MAX_BACKTRACKS: usize = 40;
const POLISH_STEPS: usize = 3;
const RESTORE_ITERS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqpOptions {
    pub feas_tol: f64,
    pub opt_tol: f64,
    pub max_iter: usize,
}

impl Default for SqpOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-12,
            opt_tol: 1e-10,
            max_iter: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EcProblem {
    /// `(ℓ+1) × ℓ` (any `m × ℓ` with `m ≥ ℓ` works).
    pub h: DenseMatrix,
    pub beta: f64,
    pub constraints: Vec<ReducedConstraint>,
    /// Starting point; the unconstrained minimiser when `None`.
    pub y_init: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EcStatus {
    Optimal,
    Infeasible,
    MaxIter,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EcSolution {
    pub y: Vec<f64>,
    /// `‖βe₁ − H y‖`.
    pub residual_norm: f64,
    /// Value of each constraint at `y`.
    pub constraint_misfit: Vec<f64>,
    /// `‖∇f + Jᵀλ‖`.
    pub kkt_norm: f64,
    pub multipliers: Vec<f64>,
    pub iterations: usize,
    pub status: EcStatus,
}

impl EcSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == EcStatus::Optimal
    }
}

struct Problem<'a> {
    h: &'a DenseMatrix,
    rhs: Vec<f64>,
    hth: DenseMatrix,
    htb: Vec<f64>,
    constraints: &'a [ReducedConstraint],
    /// per-constraint scaling applied inside the iteration
    sigma: Vec<f64>,
}

/// Quantities at one `(y, λ)` pair, in scaled constraint units.
struct Point {
    y: Vec<f64>,
    lambda: Vec<f64>,
    grad_f: Vec<f64>,
    cons: Vec<f64>,
    jac: Vec<Vec<f64>>,
    grad_l: Vec<f64>,
}

impl Point {
    fn merit(&self) -> f64 {
        dot(&self.grad_l, &self.grad_l) + MERIT_RHO * dot(&self.cons, &self.cons)
    }

    fn max_violation(&self) -> f64 {
        norm_inf(&self.cons)
    }

    fn finite(&self) -> bool {
        self.grad_l.iter().chain(&self.cons).all(|v| v.is_finite())
    }
}

impl<'a> Problem<'a> {
    fn point(&self, y: Vec<f64>, lambda: Vec<f64>) -> Point {
        let mut grad_f = self.hth.matvec(&y).expect("dimension checked");
        for (g, b) in grad_f.iter_mut().zip(&self.htb) {
            *g -= b;
        }
        let mut cons = Vec::with_capacity(self.constraints.len());
        let mut jac = Vec::with_capacity(self.constraints.len());
        let mut grad_l = grad_f.clone();
        for ((c, s), l) in self.constraints.iter().zip(&self.sigma).zip(&lambda) {
            cons.push(s * c.evaluate_unchecked(&y));
            let j: Vec<f64> = c
                .jacobian(&y)
                .expect("dimension checked")
                .into_iter()
                .map(|v| s * v)
                .collect();
            for (gl, ji) in grad_l.iter_mut().zip(&j) {
                *gl += l * ji;
            }
            jac.push(j);
        }
        Point {
            y,
            lambda,
            grad_f,
            cons,
            jac,
            grad_l,
        }
    }

    /// Lagrangian Hessian `HᵀH + Σ λᵢ σᵢ 2Gᵢ`.
    fn hessian(&self, lambda: &[f64]) -> DenseMatrix {
        let mut w = self.hth.clone();
        let l = w.nrows();
        for ((c, s), lam) in self.constraints.iter().zip(&self.sigma).zip(lambda) {
            let f = 2.0 * s * lam;
            if f == 0.0 {
                continue;
            }
            for i in 0..l {
                for j in 0..l {
                    w[(i, j)] += f * c.g_mat[(i, j)];
                }
            }
        }
        w
    }

    /// Factorises the damped KKT matrix at `p`.
    fn kkt_factor(&self, p: &Point, mu: f64) -> Result<LuFactor> {
        let l = p.y.len();
        let k = p.cons.len();
        let w = self.hessian(&p.lambda);
        let mut kkt = DenseMatrix::zeros(l + k, l + k);
        for i in 0..l {
            for j in 0..l {
                kkt[(i, j)] = w[(i, j)];
            }
            kkt[(i, i)] += mu;
        }
        for (r, ji) in p.jac.iter().enumerate() {
            for (j, &v) in ji.iter().enumerate() {
                kkt[(l + r, j)] = v;
                kkt[(j, l + r)] = v;
            }
            kkt[(l + r, l + r)] = -mu;
        }
        LuFactor::new(&kkt)
    }

    /// Newton step `(dy, dλ)` from `p` using a factorised KKT matrix.
    fn direction(&self, lu: &LuFactor, p: &Point) -> Result<(Vec<f64>, Vec<f64>)> {
        let l = p.y.len();
        let mut rhs: Vec<f64> = p.grad_f.iter().map(|g| -g).collect();
        rhs.extend(p.cons.iter().map(|c| -c));
        let sol = lu.solve(&rhs)?;
        if !sol.iter().all(|v| v.is_finite()) {
            return Err(Error::SingularMatrix {
                column: 0,
                pivot: f64::NAN,
            });
        }
        let dy = sol[..l].to_vec();
        let dlambda = sol[l..].iter().zip(&p.lambda).map(|(n, o)| n - o).collect();
        Ok((dy, dlambda))
    }

    /// Solves the damped KKT system; returns `(dy, dλ)`.
    fn newton_direction(&self, p: &Point, mu: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        self.direction(&self.kkt_factor(p, mu)?, p)
    }

    fn step(&self, p: &Point, dy: &[f64], dl: &[f64], alpha: f64) -> Point {
        let y = p.y.iter().zip(dy).map(|(a, d)| a + alpha * d).collect();
        let lambda = p.lambda.iter().zip(dl).map(|(a, d)| a + alpha * d).collect();
        self.point(y, lambda)
    }

    fn solution(&self, p: &Point, iterations: usize, status: EcStatus) -> EcSolution {
        let hy = self.h.matvec(&p.y).expect("dimension checked");
        let residual_norm = norm2(&hy.iter().zip(&self.rhs).map(|(a, b)| b - a).collect::<Vec<_>>());
        EcSolution {
            y: p.y.clone(),
            residual_norm,
            constraint_misfit: self.constraints.iter().map(|c| c.evaluate_unchecked(&p.y)).collect(),
            kkt_norm: norm2(&p.grad_l),
            multipliers: p.lambda.iter().zip(&self.sigma).map(|(l, s)| l * s).collect(),
            iterations,
            status,
        }
    }
}

/// Minimises the Hessenberg residual subject to the reduced constraints.
///
/// With no constraints this returns the least-squares minimiser unchanged.
/// Feasibility is tested as `|hᵢ(y)| ≤ feas_tol · max(1, sᵢ)` where `sᵢ` is
/// the sum of magnitudes of the terms of constraint `i` at the start point,
/// and stationarity as `‖∇L‖ ≤ opt_tol · max(1, ‖Hᵀβe₁‖)`.
pub fn solve_constrained(problem: &EcProblem, opts: &SqpOptions) -> Result<EcSolution> {
    let (m, l) = problem.h.shape();
    if l == 0 {
        return Err(Error::InvalidArgument(
            "constrained solve needs at least one unknown".into(),
        ));
    }
    for c in &problem.constraints {
        check_len("solve_constrained (constraint size)", l, c.dim())?;
    }
    if let Some(y0) = &problem.y_init {
        check_len("solve_constrained (y_init)", l, y0.len())?;
    }
    let mut rhs = vec![0.0; m];
    rhs[0] = problem.beta;
    let ls = qr_lstsq(&problem.h, &rhs)?;

    let hth = problem.h.gram();
    let htb = problem.h.tr_matvec(&rhs)?;
    let y0 = problem.y_init.clone().unwrap_or_else(|| ls.solution.clone());
    let sigma = problem
        .constraints
        .iter()
        .map(|c| 1.0 / c.term_scale(&y0).max(1.0))
        .collect();
    let prob = Problem {
        h: &problem.h,
        rhs,
        hth,
        htb,
        constraints: &problem.constraints,
        sigma,
    };

    if problem.constraints.is_empty() {
        let p = prob.point(ls.solution.clone(), Vec::new());
        let mut sol = prob.solution(&p, 0, EcStatus::Optimal);
        sol.residual_norm = ls.residual_norm;
        return Ok(sol);
    }

    let opt_threshold = opts.opt_tol * norm2(&prob.htb).max(1.0);
    let first = newton_kkt(&prob, y0.clone(), opts, opt_threshold);
    if first.is_optimal() {
        return Ok(first);
    }
    // Newton on the KKT system can stall at an infeasible stationary point
    // of the merit function; restart from a feasible point when one exists.
    match restore(&prob, &y0, opts) {
        Some(y) => {
            let mut second = newton_kkt(&prob, y, opts, opt_threshold);
            second.iterations += first.iterations;
            Ok(if second.is_optimal() { second } else { first })
        }
        None => Ok(first),
    }
}

fn newton_kkt(prob: &Problem<'_>, y0: Vec<f64>, opts: &SqpOptions, opt_threshold: f64) -> EcSolution {
    let converged = |p: &Point| p.max_violation() <= opts.feas_tol && norm2(&p.grad_l) <= opt_threshold;
    let k = prob.constraints.len();
    let mut p = prob.point(y0, vec![0.0; k]);
    let w_scale = prob.hth.norm_inf().max(1.0);
    let mu_max = 1e10 * w_scale;
    let mut mu = 0.0;
    let mut best_violation = f64::INFINITY;
    let mut since_progress = 0;

    for iter in 0..opts.max_iter {
        if !p.finite() {
            return prob.solution(&p, iter, EcStatus::NumericalFailure);
        }
        if converged(&p) {
            return polish(prob, p, iter, opt_threshold);
        }
        let violation = norm2(&p.cons);
        if violation < 0.9 * best_violation {
            best_violation = violation;
            since_progress = 0;
        } else {
            since_progress += 1;
            if since_progress >= STALL_WINDOW && p.max_violation() > opts.feas_tol {
                return prob.solution(&p, iter, EcStatus::Infeasible);
            }
        }

        let phi0 = p.merit();
        let mut accepted = None;
        while accepted.is_none() {
            // a singular KKT matrix is handled by raising the damping
            if let Ok((dy, dl)) = prob.newton_direction(&p, mu) {
                let mut alpha = 1.0;
                for _ in 0..MAX_BACKTRACKS {
                    let trial = prob.step(&p, &dy, &dl, alpha);
                    if trial.finite() && trial.merit() <= (1.0 - 1e-4 * alpha) * phi0 {
                        accepted = Some(trial);
                        break;
                    }
                    alpha *= 0.5;
                }
            }
            if accepted.is_none() {
                mu = if mu == 0.0 { 1e-10 * w_scale } else { mu * 10.0 };
                if mu > mu_max {
                    let status = if p.max_violation() > opts.feas_tol {
                        EcStatus::Infeasible
                    } else {
                        EcStatus::MaxIter
                    };
                    return prob.solution(&p, iter, status);
                }
            }
        }
        p = accepted.expect("loop exits with a step");
        mu = if mu > 1e-10 * w_scale { mu / 10.0 } else { 0.0 };
    }

    if !p.finite() {
        return prob.solution(&p, opts.max_iter, EcStatus::NumericalFailure);
    }
    if converged(&p) {
        return polish(prob, p, opts.max_iter, opt_threshold);
    }
    prob.solution(&p, opts.max_iter, EcStatus::MaxIter)
}

/// Feasibility restoration: damped Gauss-Newton on `½‖h(y)‖²` with
/// minimum-norm steps `dy = −Jᵀ(JJᵀ + μI)⁻¹h`. Returns a point meeting the
/// feasibility tolerance, or `None`.
fn restore(prob: &Problem<'_>, y0: &[f64], opts: &SqpOptions) -> Option<Vec<f64>> {
    let k = prob.constraints.len();
    let mut p = prob.point(y0.to_vec(), vec![0.0; k]);
    let mut mu = 0.0;
    for _ in 0..RESTORE_ITERS {
        if !p.finite() {
            return None;
        }
        if p.max_violation() <= opts.feas_tol {
            return Some(p.y);
        }
        let mut jjt = DenseMatrix::zeros(k, k);
        for a in 0..k {
            for b in 0..k {
                jjt[(a, b)] = dot(&p.jac[a], &p.jac[b]);
            }
        }
        let scale = jjt.norm_inf();
        if !(scale > 0.0) {
            return None;
        }
        let h0 = dot(&p.cons, &p.cons);
        let mut accepted = None;
        while accepted.is_none() {
            let mut damped = jjt.clone();
            for a in 0..k {
                damped[(a, a)] += mu;
            }
            if let Ok(w) = LuFactor::new(&damped).and_then(|lu| lu.solve(&p.cons)) {
                let mut dy = vec![0.0; p.y.len()];
                for (ja, wa) in p.jac.iter().zip(&w) {
                    for (d, j) in dy.iter_mut().zip(ja) {
                        *d -= wa * j;
                    }
                }
                let mut alpha = 1.0;
                for _ in 0..MAX_BACKTRACKS {
                    let y = p.y.iter().zip(&dy).map(|(y, d)| y + alpha * d).collect();
                    let trial = prob.point(y, vec![0.0; k]);
                    if trial.finite() && dot(&trial.cons, &trial.cons) <= (1.0 - 1e-4 * alpha) * h0 {
                        accepted = Some(trial);
                        break;
                    }
                    alpha *= 0.5;
                }
            }
            if accepted.is_none() {
                mu = if mu == 0.0 { 1e-12 * scale } else { mu * 10.0 };
                if mu > 1e10 * scale {
                    return None;
                }
            }
        }
        p = accepted.expect("loop exits with a step");
        mu = if mu > 1e-12 * scale { mu / 10.0 } else { 0.0 };
    }
    (p.max_violation() <= opts.feas_tol).then_some(p.y)
}

/// A few undamped simplified-Newton steps past the tolerances, kept while they reduce
/// the constraint violation.
fn polish(prob: &Problem<'_>, mut p: Point, iterations: usize, opt_threshold: f64) -> EcSolution {
    // simplified Newton: one factorisation serves every polishing step
    let Ok(lu) = prob.kkt_factor(&p, 0.0) else {
        return prob.solution(&p, iterations, EcStatus::Optimal);
    };
    for _ in 0..POLISH_STEPS {
        if p.max_violation() == 0.0 {
            break;
        }
        let Ok((dy, dl)) = prob.direction(&lu, &p) else {
            break;
        };
        let trial = prob.step(&p, &dy, &dl, 1.0);
        if trial.finite() && trial.max_violation() < p.max_violation() && norm2(&trial.grad_l) <= opt_threshold {
            p = trial;
        } else {
            break;
        }
    }
    prob.solution(&p, iterations, EcStatus::Optimal)
}
