//! Exact plane and cylinder fields `u = U(qᵀ(x−x0))`, `u = U_k(|R0(x−x*)|)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Jet, Point, ScalarField};
use crate::error::{Error, Result};
use crate::profile::{inverse_map, synth_g, Profile, TransformParams};
use crate::spectral::{Projection, SymMatrix};

/// Tolerance on `|q| = 1`.
pub const UNIT_TOL: f64 = 1e-12;
/// Tolerance on the projection invariants of a supplied `R0`.
pub const PROJECTION_TOL: f64 = 1e-9;
/// Relative axis margin; scaled by `max(1, (k−1)/C1)`.
pub const EPS_AXIS_REL: f64 = 1e-6;

/// Axis-aligned working box `lo ≤ x ≤ hi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn contains(&self, x: &Point) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| *v >= *l && *v <= *h)
    }

    pub fn contains_interior(&self, x: &Point) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| *v > *l && *v < *h)
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.lo.len() != n || self.hi.len() != n {
            return Err(Error::InvalidSpec(format!("domain box must have {n} coordinates per corner")));
        }
        if self.lo.iter().zip(&self.hi).any(|(l, h)| !(l < h)) {
            return Err(Error::InvalidSpec("domain box needs lo < hi in every coordinate".into()));
        }
        Ok(())
    }
}

/// Level-set geometry of a canonical field.
#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    Plane { q: DVector<f64>, x0: DVector<f64> },
    Cylinder { r0: Projection, x_star: DVector<f64> },
}

impl Geometry {
    pub fn dim(&self) -> usize {
        match self {
            Geometry::Plane { q, .. } => q.len(),
            Geometry::Cylinder { x_star, .. } => x_star.len(),
        }
    }

    /// `(r, ∇r)` with `r = qᵀ(x−x0)` or `r = |R0(x−x*)|`; the gradient is
    /// `None` on the axis.
    fn radial(&self, x: &Point) -> (f64, Option<DVector<f64>>) {
        match self {
            Geometry::Plane { q, x0 } => (q.dot(&(x - x0)), Some(q.clone())),
            Geometry::Cylinder { r0, x_star } => {
                let y = r0.matrix().as_matrix() * (x - x_star);
                let r = y.norm();
                if r > 0.0 {
                    (r, Some(y / r))
                } else {
                    (0.0, None)
                }
            }
        }
    }

    /// `𝓗r`: zero for planes, `(R0 − nnᵀ)/r` for cylinders.
    fn radial_hessian(&self, r: f64, n: &DVector<f64>) -> DMatrix<f64> {
        match self {
            Geometry::Plane { q, .. } => DMatrix::zeros(q.len(), q.len()),
            Geometry::Cylinder { r0, .. } => (r0.matrix().as_matrix() - n * n.transpose()) / r,
        }
    }
}

/// Exact canonical isoparametric field.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalField {
    geometry: Geometry,
    params: TransformParams,
    profile: Profile,
    eps_axis: f64,
    domain: Option<BoxDomain>,
}

impl CanonicalField {
    /// `u = U(qᵀ(x−x0))`. `q` must be a unit vector.
    pub fn plane(q: DVector<f64>, x0: DVector<f64>, profile: Profile) -> Result<Self> {
        if q.len() != x0.len() {
            return Err(Error::DimensionMismatch { expected: q.len(), found: x0.len() });
        }
        if q.iter().chain(x0.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let norm = q.norm();
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::InvalidSpec(format!("q must be a unit vector, |q| = {norm}")));
        }
        Ok(CanonicalField {
            geometry: Geometry::Plane { q: q / norm, x0 },
            params: TransformParams::Plane,
            profile,
            eps_axis: 0.0,
            domain: None,
        })
    }

    /// `u = U_k(|R0(x−x*)|)` with `k = rank R0`.
    pub fn cylinder(r0: Projection, x_star: DVector<f64>, c1: f64, profile: Profile) -> Result<Self> {
        if r0.dim() != x_star.len() {
            return Err(Error::DimensionMismatch { expected: r0.dim(), found: x_star.len() });
        }
        if x_star.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let params = TransformParams::cylinder(r0.rank(), c1)?;
        let eps_axis = EPS_AXIS_REL * params.base_offset().max(1.0);
        Ok(CanonicalField { geometry: Geometry::Cylinder { r0, x_star }, params, profile, eps_axis, domain: None })
    }

    /// Restrict admissibility to `domain`. For cylinders the axis point
    /// `x*` must lie outside the open box.
    pub fn with_domain(mut self, domain: BoxDomain) -> Result<Self> {
        domain.validate(self.dim())?;
        if let Geometry::Cylinder { x_star, .. } = &self.geometry {
            if domain.contains_interior(x_star) {
                return Err(Error::InvalidSpec("x_star lies inside the working domain".into()));
            }
        }
        self.domain = Some(domain);
        Ok(self)
    }

    pub fn with_eps_axis(mut self, eps_axis: f64) -> Result<Self> {
        if !(eps_axis >= 0.0 && eps_axis.is_finite()) {
            return Err(Error::InvalidSpec(format!("eps_axis must be non-negative, got {eps_axis}")));
        }
        self.eps_axis = eps_axis;
        Ok(self)
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn params(&self) -> &TransformParams {
        &self.params
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn eps_axis(&self) -> f64 {
        self.eps_axis
    }

    pub fn domain(&self) -> Option<&BoxDomain> {
        self.domain.as_ref()
    }

    /// `k` for cylinders, `None` for planes.
    pub fn rank(&self) -> Option<usize> {
        match &self.geometry {
            Geometry::Plane { .. } => None,
            Geometry::Cylinder { r0, .. } => Some(r0.rank()),
        }
    }

    /// `|∇u| = f(u)`.
    pub fn f(&self, t: f64) -> f64 {
        self.profile.f(t)
    }

    /// `Δu = g(u)` with `g` forced by the constitutive relation.
    pub fn g(&self, t: f64) -> Result<f64> {
        synth_g(&self.profile, &self.params, t)
    }

    /// Open range `(lo, hi)` of the level coordinate `r` on which `U` is defined.
    pub fn level_range(&self) -> (f64, f64) {
        let (lo, hi) = self.profile.primitive_limits();
        let off = self.params.base_offset();
        match self.params {
            TransformParams::Plane => (lo, hi),
            TransformParams::Cylinder { .. } => ((lo + off).max(self.eps_axis), hi + off),
        }
    }

    /// Level coordinate `r`: `qᵀ(x−x0)` or `|R0(x−x*)|`.
    pub fn level_coordinate(&self, x: &Point) -> f64 {
        self.geometry.radial(x).0
    }

    /// The unit-gradient field `v = F∘u` (`F_k∘u` for cylinders).
    pub fn unit_field(&self) -> DistanceField {
        DistanceField {
            geometry: self.geometry.clone(),
            offset: self.params.base_offset(),
            eps_axis: self.eps_axis,
            domain: self.domain.clone(),
        }
    }

    /// A point on the base level set `u = C0`.
    pub fn base_point(&self) -> Point {
        match &self.geometry {
            Geometry::Plane { x0, .. } => x0.clone(),
            Geometry::Cylinder { r0, x_star } => {
                let m = r0.matrix().as_matrix();
                let col = (0..m.ncols()).max_by(|&a, &b| m[(a, a)].total_cmp(&m[(b, b)])).unwrap_or(0);
                let dir = m.column(col).into_owned();
                x_star + dir.normalize() * self.params.base_offset()
            }
        }
    }

    pub fn to_spec(&self) -> FieldSpec {
        match &self.geometry {
            Geometry::Plane { q, x0 } => FieldSpec::Plane {
                n: q.len(),
                q: q.iter().copied().collect(),
                x0: x0.iter().copied().collect(),
                profile: self.profile.clone(),
                domain: self.domain.clone(),
            },
            Geometry::Cylinder { r0, x_star } => FieldSpec::Cylinder {
                n: x_star.len(),
                r0: r0.matrix().rows(),
                x_star: x_star.iter().copied().collect(),
                k: r0.rank(),
                c1: match self.params {
                    TransformParams::Cylinder { onelap, .. } => onelap,
                    TransformParams::Plane => unreachable!("cylinder geometry carries cylinder params"),
                },
                profile: self.profile.clone(),
                eps_axis: Some(self.eps_axis),
                domain: self.domain.clone(),
            },
        }
    }

    fn exact_jet(&self, x: &Point) -> Result<Jet> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        let (r, grad_r) = self.geometry.radial(x);
        if matches!(self.geometry, Geometry::Cylinder { .. }) && !(r >= self.eps_axis && r > 0.0) {
            return Err(Error::AxisTooClose { distance: r, margin: self.eps_axis });
        }
        let n = grad_r.ok_or(Error::AxisTooClose { distance: r, margin: self.eps_axis })?;
        let (u, du, ddu) = self.profile.inverse_jet(&self.params, r)?;
        let hess = &n * n.transpose() * ddu + self.geometry.radial_hessian(r, &n) * du;
        Ok(Jet { x: x.clone(), u, grad: n * du, hess: SymMatrix::symmetrized(&hess)? })
    }
}

impl ScalarField for CanonicalField {
    fn dim(&self) -> usize {
        self.geometry.dim()
    }

    fn value(&self, x: &Point) -> f64 {
        inverse_map(&self.profile, &self.params, self.level_coordinate(x)).unwrap_or(f64::NAN)
    }

    fn admissible(&self, x: &Point) -> bool {
        if x.len() != self.dim() || self.domain.as_ref().is_some_and(|d| !d.contains(x)) {
            return false;
        }
        let r = self.level_coordinate(x);
        let (lo, hi) = self.level_range();
        r > lo && r < hi
    }

    fn analytic_jet(&self, x: &Point) -> Option<Result<Jet>> {
        Some(self.exact_jet(x))
    }
}

/// Unit-gradient field `v`: `qᵀ(x−x0)` or `|R0(x−x*)| − (k−1)/C1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    geometry: Geometry,
    offset: f64,
    eps_axis: f64,
    domain: Option<BoxDomain>,
}

impl DistanceField {
    pub fn plane(q: DVector<f64>, x0: DVector<f64>) -> Result<Self> {
        let norm = q.norm();
        if (norm - 1.0).abs() > UNIT_TOL || q.len() != x0.len() {
            return Err(Error::InvalidSpec(format!("q must be a unit vector of matching dimension, |q| = {norm}")));
        }
        Ok(DistanceField { geometry: Geometry::Plane { q, x0 }, offset: 0.0, eps_axis: 0.0, domain: None })
    }

    /// `v = |R0(x−x*)| − 1/c1` with principal curvature `c1 > 0`.
    pub fn cylinder(r0: Projection, x_star: DVector<f64>, c1: f64) -> Result<Self> {
        if !(c1 > 0.0 && c1.is_finite()) {
            return Err(Error::InvalidSpec(format!("curvature must be positive, got {c1}")));
        }
        if r0.dim() != x_star.len() {
            return Err(Error::DimensionMismatch { expected: r0.dim(), found: x_star.len() });
        }
        if r0.rank() < 2 {
            return Err(Error::InvalidSpec(format!("cylinder needs k >= 2, got {}", r0.rank())));
        }
        let offset = 1.0 / c1;
        Ok(DistanceField {
            geometry: Geometry::Cylinder { r0, x_star },
            offset,
            eps_axis: EPS_AXIS_REL * offset.max(1.0),
            domain: None,
        })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    /// Principal curvature `c1` of the zero level set; zero for planes.
    pub fn curvature(&self) -> f64 {
        if self.offset > 0.0 {
            1.0 / self.offset
        } else {
            0.0
        }
    }

    /// Nonzero principal curvature and its multiplicity `k−1`.
    pub fn curvature_spectrum(&self) -> Vec<(f64, usize)> {
        match &self.geometry {
            Geometry::Plane { .. } => vec![],
            Geometry::Cylinder { r0, .. } => vec![(self.curvature(), r0.rank() - 1)],
        }
    }

    pub fn eps_axis(&self) -> f64 {
        self.eps_axis
    }

    fn exact_jet(&self, x: &Point) -> Result<Jet> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        let (r, grad_r) = self.geometry.radial(x);
        if matches!(self.geometry, Geometry::Cylinder { .. }) && !(r >= self.eps_axis && r > 0.0) {
            return Err(Error::AxisTooClose { distance: r, margin: self.eps_axis });
        }
        let n = grad_r.ok_or(Error::AxisTooClose { distance: r, margin: self.eps_axis })?;
        let hess = self.geometry.radial_hessian(r, &n);
        Ok(Jet { x: x.clone(), u: r - self.offset, grad: n, hess: SymMatrix::symmetrized(&hess)? })
    }
}

impl ScalarField for DistanceField {
    fn dim(&self) -> usize {
        self.geometry.dim()
    }

    fn value(&self, x: &Point) -> f64 {
        self.geometry.radial(x).0 - self.offset
    }

    fn admissible(&self, x: &Point) -> bool {
        if x.len() != self.dim() || self.domain.as_ref().is_some_and(|d| !d.contains(x)) {
            return false;
        }
        match self.geometry {
            Geometry::Plane { .. } => true,
            Geometry::Cylinder { .. } => self.geometry.radial(x).0 > self.eps_axis,
        }
    }

    fn analytic_jet(&self, x: &Point) -> Option<Result<Jet>> {
        Some(self.exact_jet(x))
    }
}

/// On-disk form of a [`CanonicalField`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum FieldSpec {
    Plane {
        n: usize,
        q: Vec<f64>,
        x0: Vec<f64>,
        profile: Profile,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<BoxDomain>,
    },
    Cylinder {
        n: usize,
        #[serde(rename = "R0")]
        r0: Vec<Vec<f64>>,
        x_star: Vec<f64>,
        k: usize,
        #[serde(rename = "C1")]
        c1: f64,
        profile: Profile,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eps_axis: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<BoxDomain>,
    },
}

impl FieldSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn check_len(name: &str, v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::InvalidSpec(format!("{name} has {} entries, expected n = {n}", v.len())));
    }
    Ok(())
}

/// Validate a spec and build the field.
pub fn make_field(spec: &FieldSpec) -> Result<CanonicalField> {
    match spec {
        FieldSpec::Plane { n, q, x0, profile, domain } => {
            check_len("q", q, *n)?;
            check_len("x0", x0, *n)?;
            let field = CanonicalField::plane(
                DVector::from_column_slice(q),
                DVector::from_column_slice(x0),
                profile.clone(),
            )?;
            match domain {
                Some(d) => field.with_domain(d.clone()),
                None => Ok(field),
            }
        }
        FieldSpec::Cylinder { n, r0, x_star, k, c1, profile, eps_axis, domain } => {
            check_len("x_star", x_star, *n)?;
            if r0.len() != *n || r0.iter().any(|row| row.len() != *n) {
                return Err(Error::InvalidSpec(format!("R0 must be {n}x{n}")));
            }
            if *k < 2 || *k > *n {
                return Err(Error::InvalidSpec(format!("cylinder needs 2 <= k <= n, got k = {k}, n = {n}")));
            }
            if !(*c1 > 0.0 && c1.is_finite()) {
                return Err(Error::InvalidSpec(format!("cylinder needs C1 > 0, got {c1}")));
            }
            let m = SymMatrix::try_from(r0.clone()).map_err(|e| Error::InvalidSpec(format!("R0: {e}")))?;
            let proj = Projection::new(m, PROJECTION_TOL).map_err(|e| Error::InvalidSpec(format!("R0: {e}")))?;
            if proj.rank() != *k {
                return Err(Error::InvalidSpec(format!("R0 has rank {} but k = {k}", proj.rank())));
            }
            let mut field = CanonicalField::cylinder(proj, DVector::from_column_slice(x_star), *c1, profile.clone())?;
            if let Some(e) = eps_axis {
                field = field.with_eps_axis(*e)?;
            }
            match domain {
                Some(d) => field.with_domain(d.clone()),
                None => Ok(field),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{fd_jet, jet, operators, JetMode};

    fn pt(v: &[f64]) -> Point {
        DVector::from_column_slice(v)
    }

    fn sphere3() -> CanonicalField {
        let profile = Profile::constant(1.0).unwrap().with_base(2.0).unwrap();
        CanonicalField::cylinder(
            Projection::new(SymMatrix::identity(3), 1e-12).unwrap(),
            pt(&[0.0, 0.0, 0.0]),
            1.0,
            profile,
        )
        .unwrap()
    }

    #[test]
    fn plane_is_coordinate() {
        let f = CanonicalField::plane(pt(&[1.0, 0.0]), pt(&[0.0, 0.0]), Profile::constant(1.0).unwrap()).unwrap();
        assert_eq!(f.value(&pt(&[0.7, -3.0])), 0.7);
        let j = jet(&f, &pt(&[0.7, -3.0]), JetMode::Analytic).unwrap();
        assert_eq!(j.grad, pt(&[1.0, 0.0]));
        assert_eq!(j.hess.frobenius_norm(), 0.0);
        let ops = operators(&j).unwrap();
        assert_eq!((ops.gradnorm, ops.laplacian, ops.ninf, ops.onelap), (1.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn sphere_is_norm() {
        let f = sphere3();
        let x = pt(&[0.3, -1.2, 2.0]);
        assert!((f.value(&x) - x.norm()).abs() < 1e-14);
        let j = jet(&f, &pt(&[2.0, 0.0, 0.0]), JetMode::Analytic).unwrap();
        assert!((&j.grad - pt(&[1.0, 0.0, 0.0])).norm() < 1e-15);
        let want = DMatrix::from_diagonal(&pt(&[0.0, 0.5, 0.5]));
        assert!((j.hess.as_matrix() - want).norm() < 1e-15);
        let ops = operators(&j).unwrap();
        assert!((ops.laplacian - 1.0).abs() < 1e-15 && ops.ninf.abs() < 1e-15 && (ops.onelap - 1.0).abs() < 1e-15);
    }

    #[test]
    fn circular_cylinder() {
        let profile = Profile::constant(1.0).unwrap().with_base(1.0).unwrap();
        let r0 = Projection::new(SymMatrix::from_diagonal(&[1.0, 1.0, 0.0]).unwrap(), 1e-12).unwrap();
        let f = CanonicalField::cylinder(r0, pt(&[0.0, 0.0, 0.0]), 1.0, profile).unwrap();
        let x = pt(&[0.6, 0.8, 5.0]);
        assert!((f.value(&x) - 1.0).abs() < 1e-15);
        let ops = operators(&jet(&f, &x, JetMode::Analytic).unwrap()).unwrap();
        assert!((ops.laplacian - 1.0).abs() < 1e-14);
    }

    #[test]
    fn axis_too_close() {
        let f = sphere3();
        let e = jet(&f, &pt(&[1e-9, 0.0, 0.0]), JetMode::Analytic).unwrap_err();
        assert!(matches!(e, Error::AxisTooClose { .. }));
        assert!(!f.admissible(&pt(&[0.0, 0.0, 0.0])));
    }

    #[test]
    fn fd_agrees_with_analytic() {
        let f = sphere3();
        for x in [pt(&[2.0, 0.3, -0.1]), pt(&[-1.0, 1.5, 0.7])] {
            let a = jet(&f, &x, JetMode::Analytic).unwrap();
            let b = fd_jet(&f, &x, 1e-4).unwrap();
            assert!((a.grad - b.grad).amax() < 1e-7);
            assert!((a.hess.as_matrix() - b.hess.as_matrix()).amax() < 1e-6);
        }
    }

    #[test]
    fn spec_validation() {
        let profile = Profile::constant(1.0).unwrap();
        let bad_q = FieldSpec::Plane { n: 2, q: vec![1.0, 1.0], x0: vec![0.0, 0.0], profile: profile.clone(), domain: None };
        assert!(matches!(make_field(&bad_q), Err(Error::InvalidSpec(_))));
        let cyl = |k: usize, c1: f64, domain: Option<BoxDomain>| FieldSpec::Cylinder {
            n: 2,
            r0: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            x_star: vec![0.0, 0.0],
            k,
            c1,
            profile: profile.clone(),
            eps_axis: None,
            domain,
        };
        assert!(matches!(make_field(&cyl(1, 1.0, None)), Err(Error::InvalidSpec(_))));
        assert!(matches!(make_field(&cyl(2, 0.0, None)), Err(Error::InvalidSpec(_))));
        let inside = BoxDomain { lo: vec![-1.0, -1.0], hi: vec![1.0, 1.0] };
        assert!(matches!(make_field(&cyl(2, 1.0, Some(inside))), Err(Error::InvalidSpec(_))));
        let outside = BoxDomain { lo: vec![1.0, -1.0], hi: vec![3.0, 1.0] };
        assert!(make_field(&cyl(2, 1.0, Some(outside))).is_ok());
    }

    #[test]
    fn spec_json_round_trip() {
        let f = sphere3();
        let json = f.to_spec().to_json().unwrap();
        assert!(json.contains("\"kind\": \"cylinder\"") && json.contains("\"R0\"") && json.contains("\"C1\""));
        let back = make_field(&FieldSpec::from_json(&json).unwrap()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn unit_field_has_unit_gradient() {
        let v = sphere3().unit_field();
        let x = pt(&[3.0, 0.0, 0.0]);
        assert!((v.value(&x) - 1.0).abs() < 1e-15);
        let j = jet(&v, &x, JetMode::Analytic).unwrap();
        assert!((j.grad.norm() - 1.0).abs() < 1e-15);
        assert!((j.hess.get(1, 1) - 1.0 / 3.0).abs() < 1e-15);
    }
}
