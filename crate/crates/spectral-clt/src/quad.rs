//! Real-line quadrature building blocks: Gauss–Legendre rules (used both for
//! rectangle contour panels and as the kernel of an adaptive integrator) and
//! deterministic pairwise summation.

/// Gauss–Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre polynomial. Nodes come out ascending.
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi-style initial guess for the i-th root (descending order).
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = w;
        nodes[i] = -x;
        weights[i] = w;
    }
    (nodes, weights)
}

/// Value and derivative of the Legendre polynomial P_n at x.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Fixed-order Gauss–Legendre application on [a, b].
fn fixed_gl(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, nodes: &[f64], weights: &[f64]) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in nodes.iter().zip(weights) {
        acc += w * f(c + h * x);
    }
    acc * h
}

/// Adaptive Gauss–Legendre integration to an absolute tolerance, by recursive
/// bisection with a 12-vs-25 point error estimate. Returns `None` when the
/// depth cap is hit before the local error target is met.
pub(crate) fn integrate(
    f: &mut dyn FnMut(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
) -> Option<f64> {
    let (lo_n, lo_w) = gauss_legendre(12);
    let (hi_n, hi_w) = gauss_legendre(25);
    let mut total = 0.0;
    // Manual stack of (a, b, tol, depth).
    let mut stack = vec![(a, b, abs_tol, 0u32)];
    while let Some((a, b, tol, depth)) = stack.pop() {
        let coarse = fixed_gl(f, a, b, &lo_n, &lo_w);
        let fine = fixed_gl(f, a, b, &hi_n, &hi_w);
        let err = (fine - coarse).abs();
        if err <= tol || b - a < 1e-14 * (1.0 + a.abs()) {
            total += fine;
        } else if depth >= 48 {
            return None;
        } else {
            let mid = 0.5 * (a + b);
            stack.push((a, mid, 0.5 * tol, depth + 1));
            stack.push((mid, b, 0.5 * tol, depth + 1));
        }
    }
    Some(total)
}

/// Pairwise (tree) summation; deterministic for a fixed slice regardless of
/// how the slice was produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Mean and (unbiased, n−1 denominator) variance via pairwise reduction.
pub fn mean_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    assert!(n >= 2, "variance needs at least two values");
    let mean = pairwise_sum(xs) / n as f64;
    let centered: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&centered) / (n as f64 - 1.0);
    (mean, var)
}
