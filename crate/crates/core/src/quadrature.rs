//! One-dimensional quadrature on nonuniform samples.

/// Composite Simpson rule on ascending, possibly nonuniform abscissae.
/// An odd trailing interval is integrated with the local cubic interpolant.
pub fn simpson(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    if n == 2 {
        return 0.5 * (x[1] - x[0]) * (y[0] + y[1]);
    }
    let intervals = n - 1;
    let paired = intervals - intervals % 2;
    let mut total = 0.0;
    let mut k = 0;
    while k < paired {
        let h0 = x[k + 1] - x[k];
        let h1 = x[k + 2] - x[k + 1];
        let hs = h0 + h1;
        total += hs / 6.0
            * ((2.0 - h1 / h0) * y[k] + hs * hs / (h0 * h1) * y[k + 1] + (2.0 - h0 / h1) * y[k + 2]);
        k += 2;
    }
    if paired < intervals {
        total += interval_integral(x, y, intervals - 1);
    }
    total
}

/// `∫_{x[0]}^{x[k]} y` for every `k`, built from local cubic interpolants.
pub fn cumulative(x: &[f64], y: &[f64]) -> Vec<f64> {
    assert_eq!(x.len(), y.len());
    let mut out = vec![0.0; x.len()];
    for j in 1..x.len() {
        out[j] = out[j - 1] + interval_integral(x, y, j - 1);
    }
    out
}

/// Integral over `[x[j], x[j+1]]` of the cubic through up to four
/// neighbouring samples.
fn interval_integral(x: &[f64], y: &[f64], j: usize) -> f64 {
    let n = x.len();
    let width = 4.min(n);
    let start = j.saturating_sub(1).min(n - width);
    let xs = &x[start..start + width];
    let ys = &y[start..start + width];
    let (a, b) = (x[j], x[j + 1]);
    // 3-point Gauss rule, exact for the cubic interpolant
    const NODES: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
    const WEIGHTS: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    NODES
        .iter()
        .zip(WEIGHTS)
        .map(|(s, w)| w * lagrange(xs, ys, mid + half * s))
        .sum::<f64>()
        * half
}

fn lagrange(xs: &[f64], ys: &[f64], at: f64) -> f64 {
    let mut total = 0.0;
    for (i, (&xi, &yi)) in xs.iter().zip(ys).enumerate() {
        let mut basis = 1.0;
        for (k, &xk) in xs.iter().enumerate() {
            if k != i {
                basis *= (at - xk) / (xi - xk);
            }
        }
        total += yi * basis;
    }
    total
}

/// Piecewise-linear interpolation on ascending abscissae (clamped).
pub fn interp_linear(x: &[f64], y: &[f64], at: f64) -> f64 {
    if at <= x[0] {
        return y[0];
    }
    let last = x.len() - 1;
    if at >= x[last] {
        return y[last];
    }
    let k = x.partition_point(|&v| v <= at) - 1;
    let s = (at - x[k]) / (x[k + 1] - x[k]);
    y[k] + s * (y[k + 1] - y[k])
}

/// Bisection for a sign change of `f` on `[lo, hi]`.
pub fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64, tol: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
