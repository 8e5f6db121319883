//! Gradient flow `c'(τ) = ∇u(c(τ))ᵀ` integrated with classical RK4.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::fields::{default_step, jet, JetMode, Point, ScalarField};

/// Gradient only; finite-difference mode uses `2n` evaluations.
pub fn gradient<F: ScalarField + ?Sized>(field: &F, x: &Point, mode: JetMode) -> Result<DVector<f64>> {
    match mode {
        JetMode::Analytic => Ok(jet(field, x, mode)?.grad),
        JetMode::Fd { h } => {
            let h = h.unwrap_or_else(|| default_step(x));
            let min = 1e3 * f64::EPSILON * x.norm();
            if !(h > 0.0) || h < min {
                return Err(Error::StepTooSmall { h, min });
            }
            let mut g = DVector::zeros(x.len());
            let mut p = x.clone();
            for i in 0..x.len() {
                let xi = x[i];
                p[i] = xi + h;
                let up = probe(field, &p)?;
                p[i] = xi - h;
                let dn = probe(field, &p)?;
                p[i] = xi;
                g[i] = (up - dn) / (2.0 * h);
            }
            Ok(g)
        }
    }
}

fn probe<F: ScalarField + ?Sized>(field: &F, p: &Point) -> Result<f64> {
    if !field.admissible(p) {
        return Err(Error::InadmissibleStencil);
    }
    let v = field.value(p);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite)
    }
}

/// RK4 nodes `c(τ_0), …, c(τ_steps)` with `τ_i = i·tau/steps`; `tau` may be
/// negative. Leaving the admissible set raises [`Error::DomainExit`] with the
/// parameter of the last completed step.
pub fn rk4_path<R>(rhs: R, x0: &Point, tau: f64, steps: usize) -> Result<Vec<Point>>
where
    R: Fn(&Point) -> Result<DVector<f64>>,
{
    if steps == 0 {
        return Err(Error::InvalidInput("flow needs at least one step".into()));
    }
    let dt = tau / steps as f64;
    let mut path = Vec::with_capacity(steps + 1);
    path.push(x0.clone());
    let mut x = x0.clone();
    for i in 0..steps {
        let exit = |e: Error| match e {
            Error::Inadmissible | Error::InadmissibleStencil | Error::AxisTooClose { .. } | Error::OutOfRange { .. } => {
                Error::DomainExit { tau: i as f64 * dt }
            }
            other => other,
        };
        let k1 = rhs(&x).map_err(exit)?;
        let k2 = rhs(&(&x + &k1 * (0.5 * dt))).map_err(exit)?;
        let k3 = rhs(&(&x + &k2 * (0.5 * dt))).map_err(exit)?;
        let k4 = rhs(&(&x + &k3 * dt)).map_err(exit)?;
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        path.push(x.clone());
    }
    Ok(path)
}

/// RK4 gradient-flow path of `field` from `x0` over `τ ∈ [0, tau]`.
pub fn gradient_flow<F: ScalarField + ?Sized>(
    field: &F,
    x0: &Point,
    tau: f64,
    steps: usize,
    mode: JetMode,
) -> Result<Vec<Point>> {
    let path = rk4_path(
        |x| {
            if !field.admissible(x) {
                return Err(Error::Inadmissible);
            }
            gradient(field, x, mode)
        },
        x0,
        tau,
        steps,
    )?;
    if let Some(last) = path.last() {
        if !field.admissible(last) {
            return Err(Error::DomainExit { tau });
        }
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::FnField;

    #[test]
    fn linear_flow_is_exact() {
        let u = FnField::new(2, |x: &Point| x[0]);
        let path = gradient_flow(&u, &Point::from_column_slice(&[0.5, 1.0]), 2.0, 10, JetMode::fd()).unwrap();
        let last = path.last().unwrap();
        assert!((last[0] - 2.5).abs() < 1e-10 && (last[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exponential_flow_matches_closed_form() {
        // u = |x|², c' = 2c, c(τ) = e^{2τ} c0
        let u = FnField::new(3, |x: &Point| x.norm_squared());
        let path = gradient_flow(&u, &Point::from_column_slice(&[1.0, 0.0, 0.0]), 0.5, 200, JetMode::fd()).unwrap();
        assert!((path[200][0] - 1f64.exp()).abs() < 1e-8);
    }

    #[test]
    fn leaving_the_domain_is_reported() {
        let u = FnField::new(1, |x: &Point| x[0]).with_domain(|x| x[0] < 1.0);
        let err = gradient_flow(&u, &Point::from_column_slice(&[0.0]), 3.0, 30, JetMode::fd()).unwrap_err();
        assert!(matches!(err, Error::DomainExit { .. }));
    }
}
