//! One-dimensional quadrature and safeguarded root finding.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Default absolute tolerance for adaptive Simpson.
pub const SIMPSON_TOL: f64 = 1e-12;
/// Cap on the number of subintervals adaptive Simpson may create.
pub const SIMPSON_MAX_INTERVALS: usize = 1_000_000;

/// Adaptive Simpson quadrature of `f` over `[a, b]` with absolute tolerance `tol`.
///
/// Uses an explicit stack with Richardson correction; gives up with
/// [`Error::NoConvergence`] once `SIMPSON_MAX_INTERVALS` subintervals have
/// been visited.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidInput("adaptive_simpson needs finite limits".into()));
    }
    if a > b {
        return adaptive_simpson(f, b, a, tol).map(|v| -v);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);

    struct Seg {
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    }
    let mut stack = vec![Seg { a, b, fa, fm, fb, whole, tol, depth: 0 }];
    let mut total = 0.0;
    let mut visited = 0usize;
    while let Some(s) = stack.pop() {
        visited += 1;
        if visited > SIMPSON_MAX_INTERVALS {
            return Err(Error::NoConvergence { iterations: visited });
        }
        let m = 0.5 * (s.a + s.b);
        let lm = 0.5 * (s.a + m);
        let rm = 0.5 * (m + s.b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - s.a) / 6.0 * (s.fa + 4.0 * flm + s.fm);
        let right = (s.b - m) / 6.0 * (s.fm + 4.0 * frm + s.fb);
        let delta = left + right - s.whole;
        if !delta.is_finite() {
            return Err(Error::NonFinite);
        }
        // depth cap guards against tolerances below rounding level
        if delta.abs() <= 15.0 * s.tol || s.depth >= 50 || m <= s.a || m >= s.b {
            total += left + right + delta / 15.0;
        } else {
            stack.push(Seg { a: m, b: s.b, fa: s.fm, fm: frm, fb: s.fb, whole: right, tol: 0.5 * s.tol, depth: s.depth + 1 });
            stack.push(Seg { a: s.a, b: m, fa: s.fa, fm: flm, fb: s.fm, whole: left, tol: 0.5 * s.tol, depth: s.depth + 1 });
        }
    }
    Ok(total)
}

/// Nodes and weights of the 16-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre_16() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre_rule(16))
}

/// Compute an `n`-point Gauss–Legendre rule by Newton iteration on `P_n`.
pub fn gauss_legendre_rule(n: usize) -> Vec<(f64, f64)> {
    let mut rule = Vec::with_capacity(n);
    let nf = n as f64;
    for i in 0..n {
        // Tricomi initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.push((x, w));
    }
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    rule
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
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

/// Composite Gauss–Legendre quadrature over `panels` equal panels of `[a, b]`.
///
/// Nodes move affinely with the limits, so the result is a smooth function of
/// `a` and `b`. Finite-difference stencils built on top of it therefore see
/// the truncation error of the stencil, not quadrature noise.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let rule = gauss_legendre_16();
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + width * p as f64;
        let half = 0.5 * width;
        let mid = lo + half;
        let mut s = 0.0;
        for &(x, w) in rule {
            s += w * f(mid + half * x);
        }
        total += half * s;
    }
    total
}

/// Safeguarded Newton iteration for a root of an increasing function on `[lo, hi]`.
///
/// `fdf` returns `(value, derivative)`. The bracket must satisfy
/// `value(lo) <= 0 <= value(hi)`. Newton steps leaving the bracket are
/// replaced by bisection.
pub fn newton_bisect<F>(fdf: F, mut lo: f64, mut hi: f64, x0: f64, xtol: f64, max_iter: usize) -> Result<f64>
where
    F: Fn(f64) -> (f64, f64),
{
    let mut x = if x0 > lo && x0 < hi { x0 } else { 0.5 * (lo + hi) };
    for _ in 0..max_iter {
        let (v, d) = fdf(x);
        if !v.is_finite() {
            return Err(Error::NonFinite);
        }
        if v == 0.0 {
            return Ok(x);
        }
        if v < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - v / d;
        let next = if d > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        let step = (next - x).abs();
        x = next;
        if step <= xtol * (1.0 + x.abs()) || hi - lo <= xtol * (1.0 + x.abs()) {
            return Ok(x);
        }
    }
    Err(Error::NoConvergence { iterations: max_iter })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_integrates_log_derivative() {
        let v = adaptive_simpson(|s| 1.0 / s, 1.0, std::f64::consts::E, SIMPSON_TOL).unwrap();
        assert!((v - 1.0).abs() < 1e-11);
    }

    #[test]
    fn simpson_reversed_limits_change_sign() {
        let a = adaptive_simpson(|s| s.exp(), 0.0, 1.0, 1e-13).unwrap();
        let b = adaptive_simpson(|s| s.exp(), 1.0, 0.0, 1e-13).unwrap();
        assert!((a + b).abs() < 1e-12);
        assert!((a - (1f64.exp() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn legendre_rule_is_exact_for_degree_31() {
        let rule = gauss_legendre_16();
        let wsum: f64 = rule.iter().map(|r| r.1).sum();
        assert!((wsum - 2.0).abs() < 1e-14);
        let m30: f64 = rule.iter().map(|&(x, w)| w * x.powi(30)).sum();
        assert!((m30 - 2.0 / 31.0).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_matches_closed_form() {
        let v = gauss_legendre(|s| (1.0 + s).recip(), 0.0, 2.0, 4);
        assert!((v - 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn newton_bisect_finds_cube_root() {
        let r = newton_bisect(|x| (x * x * x - 2.0, 3.0 * x * x), 0.0, 2.0, 0.0, 1e-15, 200).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-14);
    }
}
