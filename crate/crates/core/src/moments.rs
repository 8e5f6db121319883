//! Weighted power sums `C_k = Σ d_i κ_i^k` and their inversion.
//!
//! The Jacobian of `y ↦ (Σ d_i y_i^k)_{k=1..m}` factors as
//! `diag(1..m) · V(y) · diag(d)` with `V` the Vandermonde matrix, so it is
//! invertible exactly when the nodes are distinct. Newton steps solve the
//! Vandermonde factor with the Björck–Pereyra recurrence.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nodes closer than this are treated as a collision.
pub const COLLISION_GAP: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 100;

/// Moment data `C_1..C_m` with multiplicities `d_1..d_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSystem {
    pub mults: Vec<usize>,
    pub moments: Vec<f64>,
}

impl MomentSystem {
    pub fn new(mults: Vec<usize>, moments: Vec<f64>) -> Result<Self> {
        if mults.is_empty() {
            return Err(Error::InvalidInput("moment system needs m >= 1".into()));
        }
        if mults.len() != moments.len() {
            return Err(Error::DimensionMismatch { expected: mults.len(), found: moments.len() });
        }
        if mults.contains(&0) {
            return Err(Error::InvalidInput("multiplicities must be positive".into()));
        }
        if moments.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(MomentSystem { mults, moments })
    }

    pub fn m(&self) -> usize {
        self.mults.len()
    }
}

/// `(C_1, …, C_m)` with `C_k = Σ_i d_i κ_i^k`.
pub fn power_sums(kappas: &[f64], mults: &[usize], m: usize) -> Result<Vec<f64>> {
    if kappas.len() != mults.len() {
        return Err(Error::DimensionMismatch { expected: kappas.len(), found: mults.len() });
    }
    let mut out = vec![0.0; m];
    for (&k, &d) in kappas.iter().zip(mults) {
        let mut pow = 1.0;
        for c in out.iter_mut() {
            pow *= k;
            *c += d as f64 * pow;
        }
    }
    Ok(out)
}

/// Jacobian `∂C_k/∂y_j = k d_j y_j^{k−1}` and its determinant from the closed
/// form `m! · d_1⋯d_m · Π_{i<j} (y_j − y_i)`.
pub fn vandermonde_jacobian(y: &[f64], mults: &[usize]) -> Result<(DMatrix<f64>, f64)> {
    let m = y.len();
    if mults.len() != m {
        return Err(Error::DimensionMismatch { expected: m, found: mults.len() });
    }
    let jac = DMatrix::from_fn(m, m, |r, c| {
        let k = r + 1;
        k as f64 * mults[c] as f64 * y[c].powi(r as i32)
    });
    Ok((jac, jacobian_determinant(y, mults)))
}

/// Closed-form determinant of the power-sum Jacobian.
pub fn jacobian_determinant(y: &[f64], mults: &[usize]) -> f64 {
    let m = y.len();
    let mut det: f64 = (1..=m).map(|k| k as f64).product();
    det *= mults.iter().map(|&d| d as f64).product::<f64>();
    for i in 0..m {
        for j in (i + 1)..m {
            det *= y[j] - y[i];
        }
    }
    det
}

/// Solve `Σ_j z_j y_j^k = b_k`, `k = 0..m−1`, in place (Björck–Pereyra,
/// primal system).
pub fn vandermonde_solve(y: &[f64], b: &mut [f64]) {
    let n = y.len();
    if n < 2 {
        return;
    }
    let last = n - 1;
    for k in 0..last {
        for i in (k + 1..=last).rev() {
            b[i] -= y[k] * b[i - 1];
        }
    }
    for k in (0..last).rev() {
        for i in (k + 1)..=last {
            b[i] /= y[i] - y[i - k - 1];
        }
        for i in k..last {
            b[i] -= b[i + 1];
        }
    }
}

fn residual(y: &[f64], sys: &MomentSystem) -> Vec<f64> {
    let f = power_sums(y, &sys.mults, sys.m()).expect("lengths checked");
    f.iter().zip(&sys.moments).map(|(a, b)| a - b).collect()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn check_distinct(y: &[f64]) -> Result<()> {
    for i in 0..y.len() {
        for j in (i + 1)..y.len() {
            let gap = (y[i] - y[j]).abs();
            if gap < COLLISION_GAP || !gap.is_finite() {
                return Err(Error::SingularJacobian { i, j, gap });
            }
        }
    }
    Ok(())
}

/// Newton step `δ` solving `J(y) δ = −r`.
fn newton_step(y: &[f64], mults: &[usize], r: &[f64]) -> Vec<f64> {
    let mut b: Vec<f64> = r.iter().enumerate().map(|(k, rk)| -rk / (k + 1) as f64).collect();
    vandermonde_solve(y, &mut b);
    b.iter().zip(mults).map(|(z, &d)| z / d as f64).collect()
}

/// Recover distinct `κ` with `power_sums(κ, d, m) = C` by damped Newton
/// iteration from `y0`. Returns the nodes sorted ascending.
///
/// A step that increases the residual is halved until it does not (up to 40
/// times). Converges when `‖r‖_∞ ≤ tol`.
pub fn invert_moments(sys: &MomentSystem, y0: &[f64], tol: f64) -> Result<Vec<f64>> {
    invert_moments_with(sys, y0, tol, DEFAULT_MAX_ITER)
}

pub fn invert_moments_with(sys: &MomentSystem, y0: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    if y0.len() != sys.m() {
        return Err(Error::DimensionMismatch { expected: sys.m(), found: y0.len() });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("tol must be positive".into()));
    }
    let mut y = y0.to_vec();
    check_distinct(&y)?;
    let mut r = residual(&y, sys);
    let mut rn = inf_norm(&r);
    for _ in 0..max_iter {
        if rn <= tol {
            // one extra full step polishes to rounding level
            let step = newton_step(&y, &sys.mults, &r);
            let cand: Vec<f64> = y.iter().zip(&step).map(|(a, b)| a + b).collect();
            if check_distinct(&cand).is_ok() {
                let rc = residual(&cand, sys);
                if inf_norm(&rc) <= rn {
                    y = cand;
                }
            }
            y.sort_by(f64::total_cmp);
            return Ok(y);
        }
        let step = newton_step(&y, &sys.mults, &r);
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand: Vec<f64> = y.iter().zip(&step).map(|(a, b)| a + lambda * b).collect();
            if cand.iter().all(|v| v.is_finite()) {
                let rc = residual(&cand, sys);
                let rcn = inf_norm(&rc);
                if rcn < rn {
                    accepted = Some((cand, rc, rcn));
                    break;
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((cand, rc, rcn)) => {
                check_distinct(&cand)?;
                y = cand;
                r = rc;
                rn = rcn;
            }
            None => return Err(Error::NoConvergence { iterations: max_iter }),
        }
    }
    Err(Error::NoConvergence { iterations: max_iter })
}

/// Heuristic starting point: nodes spread symmetrically around the weighted
/// mean `C_1/Σd` with the weighted standard deviation from `C_2`.
pub fn heuristic_guess(sys: &MomentSystem) -> Vec<f64> {
    let m = sys.m();
    let total: f64 = sys.mults.iter().map(|&d| d as f64).sum();
    let mean = sys.moments[0] / total;
    let var = if m >= 2 { sys.moments[1] / total - mean * mean } else { 0.0 };
    let sd = var.max(1e-4).sqrt();
    if m == 1 {
        return vec![mean];
    }
    (0..m)
        .map(|i| mean + sd * (2.0 * i as f64 / (m - 1) as f64 - 1.0) * 1.5)
        .collect()
}
