//! Shared numerical helpers: Gauss–Legendre rules, log-log exponent fitting,
//! and small sampling utilities used across modules.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
///
/// Newton iteration on the Legendre recurrence; accurate to machine precision
/// for the modest orders used here (n ≤ 64).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature order must be positive");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_pair(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Value and derivative of the Legendre polynomial `P_n` at `x`.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped onto `[a, b]`.
pub fn gauss_legendre_on(a: f64, b: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let (xs, ws) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (
        xs.iter().map(|x| mid + half * x).collect(),
        ws.iter().map(|w| w * half).collect(),
    )
}

/// `n` evenly spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    let h = (b - a) / (n as f64 - 1.0);
    (0..n).map(|i| a + h * i as f64).collect()
}

/// `n` logarithmically spaced points from `a` to `b` inclusive (both > 0).
pub fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(a > 0.0 && b > 0.0);
    linspace(a.ln(), b.ln(), n).into_iter().map(f64::exp).collect()
}

/// Ordinary least-squares slope of `ys` against `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    sxy / sxx
}

/// Window over which leading exponents are fitted: `log r ∈ [-16, -2.3]`.
pub const FIT_LOG_LO: f64 = -16.0;
pub const FIT_LOG_HI: f64 = -2.3;

/// Fits the leading small-`r` exponent of `|f(r)|`, i.e. the slope of
/// `log |f(e^L)|` in `L`.
///
/// Log-periodic amplitudes (period π in `L` for the oscillation families) are
/// removed by a moving average of width exactly π before the straight-line
/// fit; the fit then uses the small-`r` half of the smoothed window so that
/// subleading power corrections are suppressed. Samples where `f` vanishes are
/// floored far below any value reachable in the fit window.
pub fn leading_exponent<F: Fn(f64) -> f64>(f: F) -> f64 {
    let n = 1600usize;
    let ls = linspace(FIT_LOG_LO, FIT_LOG_HI, n);
    let ys: Vec<f64> = ls
        .iter()
        .map(|&l| f(l.exp()).abs().max(1e-300).ln())
        .collect();
    let h = (FIT_LOG_HI - FIT_LOG_LO) / (n as f64 - 1.0);
    let half = (0.5 * PI / h).round() as usize;
    let mut sm_l = Vec::new();
    let mut sm_y = Vec::new();
    for i in half..n - half {
        let window = &ys[i - half..=i + half];
        let avg = window.iter().sum::<f64>() / window.len() as f64;
        sm_l.push(ls[i]);
        sm_y.push(avg);
    }
    let cut = -9.0;
    let mut fx = Vec::new();
    let mut fy = Vec::new();
    for (l, y) in sm_l.iter().zip(&sm_y) {
        if *l <= cut {
            fx.push(*l);
            fy.push(*y);
        }
    }
    ls_slope(&fx, &fy)
}

/// Trapezoid integral of uniformly spaced samples with spacing `h`.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    h * (0.5 * values[0] + inner + 0.5 * values[values.len() - 1])
}
