//! Legendre polynomials, Gauss and Gauss–Lobatto rules on `[-1, 1]`, and
//! Lagrange interpolation bases.

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
pub fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = if (1.0 - x * x).abs() < 1e-300 {
        // P_n'(±1) = (±1)^{n+1} n(n+1)/2
        let s = if x > 0.0 || n % 2 == 1 { 1.0 } else { -1.0 };
        s * nf * (nf + 1.0) / 2.0
    } else {
        nf * (x * p1 - p0) / (x * x - 1.0)
    };
    (p1, dp)
}

/// Finds the `count` simple roots of `f` in `(a, b)` by bracketing on a
/// sampling grid, then Newton steps safeguarded by bisection.
pub(crate) fn bracketed_roots<F>(f: F, a: f64, b: f64, count: usize) -> Vec<f64>
where
    F: Fn(f64) -> (f64, f64),
{
    let samples = 64 * (count + 1);
    let h = (b - a) / samples as f64;
    let mut roots = Vec::with_capacity(count);
    let mut x_prev = a;
    let mut f_prev = f(a).0;
    for k in 1..=samples {
        let x = if k == samples { b } else { a + h * k as f64 };
        let fx = f(x).0;
        if fx == 0.0 {
            roots.push(x);
        } else if f_prev != 0.0 && f_prev.signum() != fx.signum() {
            roots.push(refine(&f, x_prev, x, f_prev));
        }
        x_prev = x;
        f_prev = fx;
    }
    roots
}

fn refine<F>(f: &F, mut lo: f64, mut hi: f64, f_lo: f64) -> f64
where
    F: Fn(f64) -> (f64, f64),
{
    let s_lo = f_lo.signum();
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (fx, dfx) = f(x);
        if fx == 0.0 {
            return x;
        }
        if fx.signum() == s_lo {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - fx / dfx;
        let next = if dfx != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 2.0 * f64::EPSILON * x.abs().max(1e-300) || hi - lo <= f64::EPSILON {
            return next;
        }
        x = next;
    }
    x
}

/// `n`-point Gauss–Legendre nodes (ascending) and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss rule needs at least one point");
    let nodes = bracketed_roots(|x| legendre(n, x), -1.0, 1.0, n);
    debug_assert_eq!(nodes.len(), n);
    let weights = nodes
        .iter()
        .map(|&x| {
            let dp = legendre(n, x).1;
            2.0 / ((1.0 - x * x) * dp * dp)
        })
        .collect();
    (nodes, weights)
}

/// `n`-point Gauss–Lobatto nodes (ascending, including ±1) on `[-1, 1]`.
pub fn gauss_lobatto_nodes(n: usize) -> Vec<f64> {
    assert!(n >= 2, "Gauss-Lobatto rule needs at least two points");
    let m = n - 1;
    let mut nodes = vec![-1.0];
    if m >= 2 {
        // interior nodes are the roots of P_m'
        let interior = bracketed_roots(
            |x| {
                let (p, dp) = legendre(m, x);
                let mf = m as f64;
                let d2p = (2.0 * x * dp - mf * (mf + 1.0) * p) / (1.0 - x * x);
                (dp, d2p)
            },
            -1.0 + 1e-14,
            1.0 - 1e-14,
            m - 1,
        );
        nodes.extend(interior);
    }
    nodes.push(1.0);
    nodes
}

/// Values of the Lagrange basis on `nodes` at `x`.
pub fn lagrange_basis(nodes: &[f64], x: f64) -> Vec<f64> {
    (0..nodes.len())
        .map(|j| {
            nodes
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != j)
                .map(|(_, &xk)| (x - xk) / (nodes[j] - xk))
                .product()
        })
        .collect()
}

/// Derivatives of the Lagrange basis on `nodes` at `x`.
pub fn lagrange_derivatives(nodes: &[f64], x: f64) -> Vec<f64> {
    let n = nodes.len();
    (0..n)
        .map(|j| {
            let mut total = 0.0;
            for m in 0..n {
                if m == j {
                    continue;
                }
                let mut term = 1.0 / (nodes[j] - nodes[m]);
                for k in 0..n {
                    if k != j && k != m {
                        term *= (x - nodes[k]) / (nodes[j] - nodes[k]);
                    }
                }
                total += term;
            }
            total
        })
        .collect()
}
