//! Quadrature rules, extrapolation and small regression helpers.

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Gauss-Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    (x.iter().map(|t| m + h * t).collect(), w.iter().map(|v| v * h).collect())
}

struct Rules {
    lo: (Vec<f64>, Vec<f64>),
    hi: (Vec<f64>, Vec<f64>),
}

fn apply(rule: &(Vec<f64>, Vec<f64>), f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64) -> f64 {
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    rule.0.iter().zip(&rule.1).map(|(x, w)| w * f(m + h * x)).sum::<f64>() * h
}

/// Adaptive 1D quadrature comparing 8- and 16-point Gauss rules on bisected panels.
/// Returns `(value, error estimate)`.
pub fn integrate(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, rtol: f64, atol: f64) -> (f64, f64) {
    let rules = Rules { lo: gauss_legendre(8), hi: gauss_legendre(16) };
    let mut stack = vec![(a, b, 0usize)];
    let mut total = 0.0;
    let mut err = 0.0;
    // Coarse pass gives the scale for the relative tolerance.
    let scale = apply(&rules.hi, &mut f, a, b).abs();
    while let Some((x0, x1, depth)) = stack.pop() {
        let lo = apply(&rules.lo, &mut f, x0, x1);
        let hi = apply(&rules.hi, &mut f, x0, x1);
        let e = (hi - lo).abs();
        let width = (x1 - x0) / (b - a);
        if e <= (rtol * scale).max(atol) * width.max(1e-3) || depth > 40 {
            total += hi;
            err += e;
        } else {
            let m = 0.5 * (x0 + x1);
            stack.push((m, x1, depth + 1));
            stack.push((x0, m, depth + 1));
        }
    }
    (total, err)
}

/// Richardson extrapolation of `s(n), s(2n), s(4n)` assuming `s(n) = s + A/n + B/n^2 + ...`.
pub fn richardson3(s1: f64, s2: f64, s4: f64) -> f64 {
    // Eliminate 1/n then 1/n^2.
    let r12 = 2.0 * s2 - s1;
    let r24 = 2.0 * s4 - s2;
    (4.0 * r24 - r12) / 3.0
}

/// Repeated Richardson extrapolation of `s(n), s(2n), s(4n), ...`, eliminating
/// `1/n, 1/n^2, ...` in turn.
pub fn richardson_doubling(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    let mut p = 2.0;
    while v.len() > 1 {
        v = v.windows(2).map(|w| (p * w[1] - w[0]) / (p - 1.0)).collect();
        p *= 2.0;
    }
    v[0]
}

/// Least-squares line `y = a + b x`; returns `(a, b, standard error of b)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let rss: f64 = x.iter().zip(y).map(|(u, v)| (v - a - b * u).powi(2)).sum();
    let se = if x.len() > 2 { (rss / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    (a, b, se)
}

/// Composite trapezoid weights for the nodes `r` (not necessarily uniform).
pub fn trapezoid_weights(r: &[f64]) -> Vec<f64> {
    let n = r.len();
    let mut w = vec![0.0; n];
    for i in 0..n.saturating_sub(1) {
        let h = r[i + 1] - r[i];
        w[i] += 0.5 * h;
        w[i + 1] += 0.5 * h;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gauss_is_exact_for_polynomials() {
        let (x, w) = gauss_legendre(6);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        assert_abs_diff_eq!(s, 2.0 / 11.0, epsilon = 1e-14);
        let (_, w) = gauss_legendre(7);
        assert_abs_diff_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let (v, _) = integrate(|x| x.sqrt().ln(), 0.0, 1.0, 1e-10, 1e-14);
        assert_abs_diff_eq!(v, -0.5, epsilon = 1e-9);
        let (v, e) = integrate(|x| (-x * x).exp(), -8.0, 8.0, 1e-12, 0.0);
        assert_abs_diff_eq!(v, PI.sqrt(), epsilon = 1e-11);
        assert!(e < 1e-10);
    }

    #[test]
    fn richardson_removes_two_orders() {
        let s = |n: f64| 3.0 + 2.0 / n - 5.0 / (n * n);
        assert_abs_diff_eq!(richardson3(s(4.0), s(8.0), s(16.0)), 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(richardson_doubling(&[s(4.0), s(8.0), s(16.0)]), 3.0, epsilon = 1e-12);
        let t = |n: f64| 1.0 + 1.0 / n + 1.0 / n.powi(2) - 7.0 / n.powi(3);
        assert_abs_diff_eq!(richardson_doubling(&[t(3.0), t(6.0), t(12.0), t(24.0)]), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn fit_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 0.5 - 2.0 * v).collect();
        let (a, b, se) = linear_fit(&x, &y);
        assert_abs_diff_eq!(a, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(b, -2.0, epsilon = 1e-12);
        assert!(se < 1e-12);
    }
}
