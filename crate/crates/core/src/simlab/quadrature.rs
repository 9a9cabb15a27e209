//! Numerical integration over the unit cube.

/// Adaptive Simpson integration of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let c = 0.5 * (a + b);
    let fc = f(c);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fc + fb);
    simpson_step(f, a, b, fa, fb, fc, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    fc: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let c = 0.5 * (a + b);
    let (l, r) = (0.5 * (a + c), 0.5 * (c + b));
    let (fl, fr) = (f(l), f(r));
    let left = (c - a) / 6.0 * (fa + 4.0 * fl + fc);
    let right = (b - c) / 6.0 * (fc + 4.0 * fr + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, c, fa, fc, fl, left, tol / 2.0, depth - 1)
        + simpson_step(f, c, b, fc, fb, fr, right, tol / 2.0, depth - 1)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let nf = order as f64;
    for i in 0..order.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(order, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(order, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    (p1, nf * (x * p1 - p0) / (x * x - 1.0))
}

/// Integral of `f` over `[0,1]^m`: adaptive Simpson for `m = 1`, a tensor
/// Gauss-Legendre grid otherwise.
pub fn integrate_unit_cube(f: &dyn Fn(&[f64]) -> f64, m: usize) -> f64 {
    if m == 1 {
        return adaptive_simpson(&|x| f(&[x]), 0.0, 1.0, 1e-10);
    }
    let order = match m {
        2 => 64,
        3 => 24,
        _ => 8,
    };
    let (nodes, weights) = gauss_legendre(order);
    let mut idx = vec![0usize; m];
    let mut point = vec![0.0; m];
    let mut total = 0.0;
    loop {
        let mut w = 1.0;
        for k in 0..m {
            point[k] = 0.5 * (nodes[idx[k]] + 1.0);
            w *= 0.5 * weights[idx[k]];
        }
        total += w * f(&point);
        let mut k = 0;
        loop {
            idx[k] += 1;
            if idx[k] < order {
                break;
            }
            idx[k] = 0;
            k += 1;
            if k == m {
                return total;
            }
        }
    }
}
