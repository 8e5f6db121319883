//! Seeded random profiles, canonical fields and admissible probe points.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{random_projection, CanonicalField, Geometry, Point, ScalarField};
use crate::error::{Error, Result};
use crate::profile::{Family, Interval, Profile, TransformParams};

/// Which canonical shape to draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Plane,
    Cylinder { k: usize },
}

/// Random profile from the constant, affine, power and tabulated families.
pub fn random_profile<R: Rng + ?Sized>(rng: &mut R) -> Result<Profile> {
    match rng.random_range(0..10u32) {
        0..=2 => {
            let a = rng.random_range(0.5..2.0);
            let c0 = rng.random_range(-1.0..1.0);
            Profile::new(Family::Constant { a }, Interval::real_line(), c0)
        }
        3..=5 => {
            let c0: f64 = rng.random_range(0.5..1.5);
            let f0 = rng.random_range(0.5..2.0);
            let b: f64 = rng.random_range(-0.4..0.4);
            let a = f0 - b * c0;
            let interval = if b > 0.0 {
                Interval::new(-a / b, f64::INFINITY)?
            } else if b < 0.0 {
                Interval::new(f64::NEG_INFINITY, -a / b)?
            } else {
                Interval::real_line()
            };
            Profile::new(Family::Affine { a, b }, interval, c0)
        }
        6..=8 => {
            let a = rng.random_range(0.5..2.0);
            let p = rng.random_range(-1.5..1.5);
            let c0 = rng.random_range(0.8..2.0);
            Profile::new(Family::Power { a, p }, Interval::positive(), c0)
        }
        _ => {
            let a = rng.random_range(0.6..1.6);
            let amp = rng.random_range(0.05..0.3);
            let omega = rng.random_range(0.5..2.0);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            let c0: f64 = rng.random_range(-1.0..1.0);
            let nodes = 121;
            let (lo, hi) = (c0 - 3.0, c0 + 3.0);
            let t: Vec<f64> = (0..nodes).map(|i| lo + (hi - lo) * i as f64 / (nodes - 1) as f64).collect();
            let f = t.iter().map(|&s| a * (1.0 + amp * (omega * s + phase).sin())).collect();
            let df = t.iter().map(|&s| a * amp * omega * (omega * s + phase).cos()).collect();
            Profile::tabulated(t, f, Some(df), c0)
        }
    }
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

/// Random canonical field in `ℝⁿ` of the given shape.
///
/// Planes get a uniform unit normal and `x0 ∈ [−1, 1]ⁿ`. Cylinders get a
/// uniform rank-`k` projection, `x* ∈ [−1, 1]ⁿ` and a base radius
/// `(k−1)/C1 ∈ [1, 2]`.
pub fn random_field<R: Rng + ?Sized>(rng: &mut R, n: usize, shape: Shape) -> Result<CanonicalField> {
    let profile = random_profile(rng)?;
    let x0 = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    match shape {
        Shape::Plane => {
            let q = gaussian(rng, n);
            let q = q.normalize();
            CanonicalField::plane(q, x0, profile)
        }
        Shape::Cylinder { k } => {
            if k < 2 || k > n {
                return Err(Error::RankOutOfRange { n, k });
            }
            let r0 = random_projection(n, k, rng.random())?;
            let radius = rng.random_range(1.0..2.0);
            CanonicalField::cylinder(r0, x0, (k - 1) as f64 / radius, profile)
        }
    }
}

/// Random shape for dimension `n`: a plane or a cylinder of uniform rank `k ∈ {2..n}`.
pub fn random_shape<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Shape {
    let choice = rng.random_range(1..=n);
    if choice == 1 {
        Shape::Plane
    } else {
        Shape::Cylinder { k: choice }
    }
}

/// Interval of level coordinates sampled around the base level: at most
/// `half_width` away and at most halfway to the ends of the admissible range.
fn level_window(field: &CanonicalField, half_width: f64) -> (f64, f64) {
    let centre = field.params().base_offset();
    let (lo, hi) = field.level_range();
    let below = if lo.is_finite() { (0.5 * (centre - lo)).min(half_width) } else { half_width };
    let above = if hi.is_finite() { (0.5 * (hi - centre)).min(half_width) } else { half_width };
    (centre - below, centre + above)
}

/// `count` admissible points near the base level set of `field`.
///
/// Level coordinates are drawn from a window around the base level (for
/// cylinders `r ∈ r0·[0.7, 1.3]`); the remaining coordinates are Gaussian
/// with unit scale. Gives up after `1000·count` rejected draws, so fewer
/// points come back only for fields whose admissible set is almost empty.
pub fn sample_points<R: Rng + ?Sized>(rng: &mut R, field: &CanonicalField, count: usize) -> Vec<Point> {
    let half = match field.params() {
        TransformParams::Plane => 0.5,
        TransformParams::Cylinder { .. } => 0.3 * field.params().base_offset(),
    };
    let (lo, hi) = level_window(field, half);
    let n = field.dim();
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count && attempts < 1000 * count.max(1) {
        attempts += 1;
        let s = rng.random_range(lo..=hi);
        let z = gaussian(rng, n);
        let x = match field.geometry() {
            Geometry::Plane { q, x0 } => {
                let tangential = &z - q * q.dot(&z);
                x0 + q * s + tangential
            }
            Geometry::Cylinder { r0, x_star } => {
                let m = r0.matrix().as_matrix();
                let radial = m * &z;
                if radial.norm() < 1e-8 {
                    continue;
                }
                let axial = &z - &radial;
                x_star + radial.normalize() * s + axial
            }
        };
        if field.admissible(&x) {
            out.push(x);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{jet, operators, JetMode};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_fields_satisfy_isoparametric_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..40 {
            let n = rng.random_range(2..=5);
            let shape = random_shape(&mut rng, n);
            let field = random_field(&mut rng, n, shape).unwrap();
            let pts = sample_points(&mut rng, &field, 20);
            assert_eq!(pts.len(), 20);
            for x in pts {
                let j = jet(&field, &x, JetMode::Analytic).unwrap();
                let ops = operators(&j).unwrap();
                assert!((ops.gradnorm - field.f(j.u)).abs() <= 1e-10);
                assert!((ops.laplacian - field.g(j.u).unwrap()).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let draw = || {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let f = random_field(&mut rng, 4, Shape::Cylinder { k: 3 }).unwrap();
            sample_points(&mut rng, &f, 5)
        };
        assert_eq!(draw(), draw());
    }
}
