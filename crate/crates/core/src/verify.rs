//! Numerical checks of the distance-function identities, the gradient-flow
//! law, harmonizing transforms and the sign convention, plus named check
//! suites over canonical fields.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::classify::{isoparametric_check, IsoCheckConfig};
use crate::error::{Error, Result};
use crate::fields::sampling::sample_points;
use crate::fields::{jet, operators, CanonicalField, Composed, Geometry, JetMode, Point, ScalarField};
use crate::flow::gradient_flow;
use crate::par::{self, Execution};
use crate::profile::{harmonize_unit, TransformParams, ViscTransform};
use crate::spectral::{cartan_sum, sym_eig, DEFAULT_GROUP_TOL};

/// Guard on `1 + tκ` below which a flow step is treated as reaching a focal point.
pub const FOCAL_EPS: f64 = 1e-8;
/// Allowed deviation of `|∇v|` from one for unit-gradient checks.
pub const UNIT_GRADIENT_TOL: f64 = 1e-8;
/// Number of points at which a segment is tested for admissibility.
const SEGMENT_PROBES: usize = 32;

/// Residuals of the distance-function identities at one point and flow time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowCheck {
    /// `|v(x + t∇v) − v(x) − t|`
    pub level_shift: f64,
    /// `‖∇v(x + t∇v) − ∇v(x)‖`
    pub gradient_change: f64,
    /// `‖𝓗v(x + t∇v) − Σ κ_i/(1 + tκ_i) P_i(x)‖_F`
    pub hessian_evolution: f64,
    /// Grouped eigenvalues of `𝓗v(x)`.
    pub kappas: Vec<f64>,
}

impl FlowCheck {
    pub fn max_residual(&self) -> f64 {
        self.level_shift.max(self.gradient_change).max(self.hessian_evolution)
    }
}

/// Check that `v` moves straight along its gradient from `x` for time `t`.
pub fn flow_checks<F: ScalarField + ?Sized>(v: &F, x: &Point, t: f64, mode: JetMode) -> Result<FlowCheck> {
    if !t.is_finite() {
        return Err(Error::NonFinite);
    }
    let j0 = jet(v, x, mode)?;
    let gnorm = j0.grad.norm();
    let unit_tol = if mode.is_fd() { 1e3 * UNIT_GRADIENT_TOL } else { UNIT_GRADIENT_TOL };
    if (gnorm - 1.0).abs() > unit_tol {
        return Err(Error::InvalidInput(format!("flow checks need |grad v| = 1, found {gnorm}")));
    }
    let group_tol = if mode.is_fd() { 1e3 * DEFAULT_GROUP_TOL } else { DEFAULT_GROUP_TOL };
    let dec = sym_eig(&j0.hess, group_tol)?;
    for &kappa in &dec.kappas {
        let value = 1.0 + t * kappa;
        if value <= FOCAL_EPS {
            return Err(Error::FocalPoint { kappa, value });
        }
    }
    for i in 0..=SEGMENT_PROBES {
        let p = x + &j0.grad * (t * i as f64 / SEGMENT_PROBES as f64);
        if !v.admissible(&p) {
            return Err(Error::InadmissibleSegment);
        }
    }
    let y = x + &j0.grad * t;
    let j1 = jet(v, &y, mode)?;
    let n = x.len();
    let expected = dec
        .kappas
        .iter()
        .zip(&dec.projections)
        .fold(DMatrix::<f64>::zeros(n, n), |acc, (k, p)| acc + p.as_matrix() * (k / (1.0 + t * k)));
    Ok(FlowCheck {
        level_shift: (j1.u - j0.u - t).abs(),
        gradient_change: (&j1.grad - &j0.grad).norm(),
        hessian_evolution: (j1.hess.as_matrix() - expected).norm(),
        kappas: dec.kappas,
    })
}

/// RK4 gradient-flow path with the scalar law `dh/dτ = f²(h)` checked along it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowPath {
    pub tau: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    /// `h(τ) = u(c(τ))`
    pub h: Vec<f64>,
    /// `f̂(h) = |∇u(c(τ))|`
    pub f: Vec<f64>,
    /// `max |h'(τ) − f̂²(h)|` over interior nodes, with `h'` from central differences.
    pub h_law_residual: f64,
    /// `max ‖c(τ) − (x0 + τ∇u(x0))‖`; zero up to RK4 error for unit-gradient fields.
    pub line_deviation: f64,
    /// `max |h(τ) − h(0) − τ|`; zero up to RK4 error for unit-gradient fields.
    pub level_shift: f64,
}

pub fn integrate_flow<F: ScalarField + ?Sized>(
    u: &F,
    x0: &Point,
    tau_max: f64,
    rk_steps: usize,
    mode: JetMode,
) -> Result<FlowPath> {
    let j0 = jet(u, x0, mode)?;
    operators(&j0)?;
    let path = gradient_flow(u, x0, tau_max, rk_steps, mode)?;
    let dt = tau_max / rk_steps as f64;
    let mut out = FlowPath {
        tau: Vec::with_capacity(path.len()),
        points: Vec::with_capacity(path.len()),
        h: Vec::with_capacity(path.len()),
        f: Vec::with_capacity(path.len()),
        h_law_residual: 0.0,
        line_deviation: 0.0,
        level_shift: 0.0,
    };
    for (i, p) in path.iter().enumerate() {
        let tau = i as f64 * dt;
        let j = jet(u, p, mode)?;
        let gn = operators(&j)?.gradnorm;
        out.line_deviation = out.line_deviation.max((p - (x0 + &j0.grad * tau)).norm());
        out.level_shift = out.level_shift.max((j.u - j0.u - tau).abs());
        out.tau.push(tau);
        out.points.push(p.iter().copied().collect());
        out.h.push(j.u);
        out.f.push(gn);
    }
    for i in 1..out.h.len().saturating_sub(1) {
        let dh = (out.h[i + 1] - out.h[i - 1]) / (2.0 * dt);
        out.h_law_residual = out.h_law_residual.max((dh - out.f[i] * out.f[i]).abs());
    }
    Ok(out)
}

/// `|Δw(x)|` from the standard `2n+1`-point central stencil.
pub fn harmonic_residual<F: ScalarField + ?Sized>(w: &F, x: &Point, h: f64) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput(format!("stencil step must be positive, got {h}")));
    }
    let eval = |p: &Point| -> Result<f64> {
        if !w.admissible(p) {
            return Err(Error::InadmissibleStencil);
        }
        let v = w.value(p);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::InadmissibleStencil)
        }
    };
    let centre = eval(x)?;
    let mut lap = 0.0;
    let mut p = x.clone();
    for i in 0..x.len() {
        let xi = x[i];
        p[i] = xi + h;
        let up = eval(&p)?;
        p[i] = xi - h;
        let dn = eval(&p)?;
        p[i] = xi;
        lap += (up - 2.0 * centre + dn) / (h * h);
    }
    Ok(lap.abs())
}

/// `+1` if `t ≥ 0` (including `−0.0`), `−1` otherwise.
pub fn sign_convention(t: f64) -> i8 {
    if t >= 0.0 {
        1
    } else {
        -1
    }
}

/// `w = G∘u` with `G` from [`ViscTransform`], anchored at `c0 = c1 = t0`.
pub fn harmonized_field(field: &CanonicalField, t0: f64) -> Result<impl ScalarField + '_> {
    let g = move |t: f64| field.g(t).unwrap_or(f64::NAN);
    let transform = ViscTransform::new(field.profile().clone(), g, t0, t0)?;
    Ok(Composed { field, map: move |t: f64| transform.value(t) })
}

/// `w = G̃∘v` for the unit-gradient field `v` of a cylinder, with
/// `G̃(t) = ∫_0^t (1 + c1 τ)^{−(k−1)} dτ`.
pub fn harmonized_unit_field(field: &CanonicalField) -> Result<impl ScalarField> {
    let (c, d) = match *field.params() {
        TransformParams::Plane => (vec![], vec![]),
        TransformParams::Cylinder { k, .. } => (vec![field.params().curvature()], vec![k - 1]),
    };
    Ok(Composed { field: field.unit_field(), map: move |t: f64| harmonize_unit(&c, &d, t) })
}

/// Named check suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Flow,
    HessianEvolution,
    Harmonic,
    Isoparametric,
    Cartan,
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flow" => Ok(Suite::Flow),
            "hessian-evolution" => Ok(Suite::HessianEvolution),
            "harmonic" => Ok(Suite::Harmonic),
            "isoparametric" => Ok(Suite::Isoparametric),
            "cartan" => Ok(Suite::Cartan),
            other => Err(Error::Parse(format!("unknown suite {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteConfig {
    pub seed: u64,
    pub samples: usize,
    pub mode: JetMode,
    pub execution: Execution,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig { seed: 0, samples: 32, mode: JetMode::Analytic, execution: Execution::default() }
    }
}

/// Aggregate of one residual over a suite's samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckStat {
    pub name: String,
    pub count: usize,
    pub max: f64,
    pub rms: f64,
    pub tol: f64,
    pub passed: bool,
}

impl CheckStat {
    pub fn from_values(name: &str, values: &[f64], tol: f64) -> Self {
        let count = values.len();
        let max = values.iter().fold(0.0f64, |m, v| if v.is_nan() { f64::NAN } else { m.max(*v) });
        let rms = if count == 0 { 0.0 } else { (values.iter().map(|v| v * v).sum::<f64>() / count as f64).sqrt() };
        CheckStat { name: name.to_string(), count, max, rms, tol, passed: count > 0 && max <= tol }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<CheckStat>,
    pub notes: Vec<String>,
}

/// Run a named suite on seeded random points of `field`.
pub fn run_suite(field: &CanonicalField, suite: Suite, cfg: &SuiteConfig) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let points = sample_points(&mut rng, field, cfg.samples.max(2));
    let mut notes = Vec::new();
    let checks = match suite {
        Suite::Flow => flow_suite(field, &points, cfg, &mut notes)?,
        Suite::HessianEvolution => hessian_suite(field, &points, &mut rng, cfg)?,
        Suite::Harmonic => harmonic_suite(field, &points, cfg)?,
        Suite::Isoparametric => iso_suite(field, &points, &mut rng, cfg)?,
        Suite::Cartan => cartan_suite(field, &points, cfg)?,
    };
    let passed = checks.iter().all(|c| c.passed);
    Ok(SuiteReport { suite, seed: cfg.seed, passed, checks, notes })
}

fn widen(cfg: &SuiteConfig, tol: f64) -> f64 {
    if cfg.mode.is_fd() {
        tol * 1e3
    } else {
        tol
    }
}

fn flow_suite(
    field: &CanonicalField,
    points: &[Point],
    cfg: &SuiteConfig,
    notes: &mut Vec<String>,
) -> Result<Vec<CheckStat>> {
    let v = field.unit_field();
    let straight = par::try_map(cfg.execution, points, |x| integrate_flow(&v, x, 1.0, 1000, cfg.mode))?;
    let law: Vec<Result<FlowPath>> = par::map(cfg.execution, points, |x| {
        let f = field.f(field.value(x));
        integrate_flow(field, x, 0.05 / (f * f.max(1.0)), 200, cfg.mode)
    });
    let mut h_law = Vec::new();
    for r in law {
        match r {
            Ok(p) => {
                let scale = p.f.iter().fold(1.0f64, |m, f| m.max(f * f));
                h_law.push(p.h_law_residual / scale);
            }
            Err(Error::DomainExit { tau }) => notes.push(format!("flow of u left the domain at tau = {tau}")),
            Err(e) => return Err(e),
        }
    }
    Ok(vec![
        CheckStat::from_values("line_deviation", &straight.iter().map(|p| p.line_deviation).collect::<Vec<_>>(), widen(cfg, 1e-8)),
        CheckStat::from_values("level_shift", &straight.iter().map(|p| p.level_shift).collect::<Vec<_>>(), widen(cfg, 1e-8)),
        CheckStat::from_values("h_law_relative", &h_law, widen(cfg, 1e-5)),
    ])
}

fn hessian_suite(field: &CanonicalField, points: &[Point], rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> Result<Vec<CheckStat>> {
    let v = field.unit_field();
    let pairs: Vec<(Point, f64)> = points
        .iter()
        .map(|x| {
            let reach = match field.params() {
                TransformParams::Plane => 1.0,
                TransformParams::Cylinder { .. } => field.level_coordinate(x),
            };
            (x.clone(), rng.random_range(-0.5..1.0) * reach)
        })
        .collect();
    let checks = par::try_map(cfg.execution, &pairs, |(x, t)| flow_checks(&v, x, *t, cfg.mode))?;
    let tol = widen(cfg, 1e-7);
    Ok(vec![
        CheckStat::from_values("level_shift", &checks.iter().map(|c| c.level_shift).collect::<Vec<_>>(), tol),
        CheckStat::from_values("gradient_change", &checks.iter().map(|c| c.gradient_change).collect::<Vec<_>>(), tol),
        CheckStat::from_values("hessian_evolution", &checks.iter().map(|c| c.hessian_evolution).collect::<Vec<_>>(), tol),
    ])
}

fn harmonic_suite(field: &CanonicalField, points: &[Point], cfg: &SuiteConfig) -> Result<Vec<CheckStat>> {
    const H: f64 = 1e-3;
    let g_res = par::try_map(cfg.execution, points, |x| {
        let w = harmonized_field(field, field.value(x))?;
        harmonic_residual(&w, x, H)
    })?;
    let wt = harmonized_unit_field(field)?;
    let gt_res = par::try_map(cfg.execution, points, |x| harmonic_residual(&wt, x, H))?;
    Ok(vec![
        CheckStat::from_values("harmonic_G", &g_res, 1e-5),
        CheckStat::from_values("harmonic_G_tilde", &gt_res, 1e-5),
    ])
}

/// Points sharing the level set of `x`.
fn level_mates(field: &CanonicalField, x: &Point, count: usize, rng: &mut ChaCha8Rng) -> Vec<Point> {
    let n = x.len();
    let mut out = vec![x.clone()];
    let mut attempts = 0;
    while out.len() < count + 1 && attempts < 50 * count {
        attempts += 1;
        let z = DVector::<f64>::from_fn(n, |_, _| StandardNormal.sample(rng));
        let y = match field.geometry() {
            Geometry::Plane { q, .. } => x + (&z - q * q.dot(&z)) * 0.5,
            Geometry::Cylinder { r0, x_star } => {
                let m = r0.matrix().as_matrix();
                let radial = m * &z;
                if radial.norm() < 1e-8 {
                    continue;
                }
                let axial = &z - &radial;
                x_star + radial.normalize() * field.level_coordinate(x) + axial
            }
        };
        if field.admissible(&y) {
            out.push(y);
        }
    }
    out
}

fn iso_suite(field: &CanonicalField, points: &[Point], rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> Result<Vec<CheckStat>> {
    let levels = points.len().min(8);
    let mut samples = Vec::new();
    for x in &points[..levels] {
        samples.extend(level_mates(field, x, 3, rng));
    }
    let iso = IsoCheckConfig {
        bin_width: 1e-9,
        tol_grad: widen(cfg, 1e-9),
        tol_lap: widen(cfg, 1e-8),
        mode: cfg.mode,
    };
    let rep = isoparametric_check(field, &samples, &iso)?;
    Ok(vec![
        CheckStat::from_values("gradnorm_spread", &rep.bins.iter().map(|b| b.grad_spread).collect::<Vec<_>>(), iso.tol_grad),
        CheckStat::from_values("laplacian_spread", &rep.bins.iter().map(|b| b.lap_spread).collect::<Vec<_>>(), iso.tol_lap),
    ])
}

fn cartan_suite(field: &CanonicalField, points: &[Point], cfg: &SuiteConfig) -> Result<Vec<CheckStat>> {
    let group_tol = widen(cfg, DEFAULT_GROUP_TOL);
    let tol_zero = widen(cfg, crate::classify::DEFAULT_TOL_ZERO);
    let rows = par::try_map(cfg.execution, points, |x| -> Result<(f64, f64)> {
        let ops = operators(&jet(field, x, cfg.mode)?)?;
        let dec = sym_eig(&ops.hess_v, group_tol)?;
        let rho = dec.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let nonzero = dec.kappas.iter().filter(|k| k.abs() > tol_zero * (1.0 + rho)).count();
        let mut worst = 0.0f64;
        for i in 0..dec.len() {
            worst = worst.max(cartan_sum(&dec.kappas, &dec.mults, i)?.abs());
        }
        Ok((nonzero as f64, worst))
    })?;
    Ok(vec![
        CheckStat::from_values("nonzero_curvatures", &rows.iter().map(|r| r.0).collect::<Vec<_>>(), 1.0),
        CheckStat::from_values("cartan_sum", &rows.iter().map(|r| r.1).collect::<Vec<_>>(), widen(cfg, 1e-8)),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{DistanceField, FnField};
    use crate::profile::Profile;
    use crate::spectral::{Projection, SymMatrix};

    fn pt(v: &[f64]) -> Point {
        DVector::from_column_slice(v)
    }

    fn sphere_distance() -> DistanceField {
        DistanceField::cylinder(Projection::new(SymMatrix::identity(3), 1e-12).unwrap(), pt(&[0.0, 0.0, 0.0]), 0.5)
            .unwrap()
    }

    #[test]
    fn affine_flow_is_exact() {
        let v = DistanceField::plane(pt(&[0.6, 0.8]), pt(&[0.0, 0.0])).unwrap();
        let c = flow_checks(&v, &pt(&[1.0, -2.0]), 3.7, JetMode::Analytic).unwrap();
        assert!(c.max_residual() < 1e-14);
    }

    #[test]
    fn radial_hessian_evolution() {
        let v = sphere_distance();
        let c = flow_checks(&v, &pt(&[2.0, 0.0, 0.0]), 1.0, JetMode::Analytic).unwrap();
        assert!(c.max_residual() < 1e-14, "{c:?}");
        let j = jet(&v, &pt(&[3.0, 0.0, 0.0]), JetMode::Analytic).unwrap();
        assert!((j.hess.get(2, 2) - (0.5 / 1.5)).abs() < 1e-15);
    }

    #[test]
    fn focal_point_is_detected() {
        let v = sphere_distance();
        for t in [-2.0, -2.0 + 1e-9, -2.5] {
            let e = flow_checks(&v, &pt(&[2.0, 0.0, 0.0]), t, JetMode::Analytic).unwrap_err();
            assert!(matches!(e, Error::FocalPoint { .. }), "{t}: {e:?}");
        }
    }

    #[test]
    fn flows_of_simple_fields() {
        let line = integrate_flow(&FnField::new(2, |x: &Point| x[0]), &pt(&[0.0, 1.0]), 1.0, 100, JetMode::fd()).unwrap();
        assert!(line.line_deviation < 1e-10 && line.level_shift < 1e-10);

        let radial = integrate_flow(&sphere_distance(), &pt(&[2.0, 0.0, 0.0]), 1.0, 1000, JetMode::Analytic).unwrap();
        assert!((radial.points.last().unwrap()[0] - 3.0).abs() < 1e-12);
        assert!(radial.h_law_residual < 1e-12);

        let sq = FnField::new(3, |x: &Point| x.norm_squared());
        let p = integrate_flow(&sq, &pt(&[1.0, 0.0, 0.0]), 0.1, 100, JetMode::fd()).unwrap();
        // f²(t) = 4t, so h' = 4h
        for (h, f) in p.h.iter().zip(&p.f) {
            assert!((f * f - 4.0 * h).abs() < 1e-6);
        }
        assert!(p.h_law_residual < 1e-4, "{}", p.h_law_residual);
    }

    #[test]
    fn harmonic_examples() {
        let w = FnField::new(2, |x: &Point| x[0] * x[1]);
        assert!(harmonic_residual(&w, &pt(&[0.3, -0.7]), 1e-3).unwrap() <= 1e-10);
        let fundamental = FnField::new(3, |x: &Point| 1.0 - 1.0 / x.norm());
        let x = pt(&[1.0, 0.5, -0.2]);
        let r1 = harmonic_residual(&fundamental, &x, 1e-2).unwrap();
        let r2 = harmonic_residual(&fundamental, &x, 5e-3).unwrap();
        assert!(r1 < 1e-3 && (r1 / r2 - 4.0).abs() < 0.2, "{r1} {r2}");
    }

    #[test]
    fn harmonized_sphere_is_harmonic() {
        let profile = Profile::constant(1.0).unwrap().with_base(2.0).unwrap();
        let field = CanonicalField::cylinder(
            Projection::new(SymMatrix::identity(3), 1e-12).unwrap(),
            pt(&[0.0, 0.0, 0.0]),
            1.0,
            profile,
        )
        .unwrap();
        let x = pt(&[1.5, 0.4, 0.3]);
        let w = harmonized_field(&field, field.value(&x)).unwrap();
        assert!(harmonic_residual(&w, &x, 1e-3).unwrap() < 1e-5);
        let wt = harmonized_unit_field(&field).unwrap();
        assert!(harmonic_residual(&wt, &x, 1e-3).unwrap() < 1e-5);
        let u = &field;
        assert!(harmonic_residual(u, &x, 1e-3).unwrap() > 0.5);
    }

    #[test]
    fn stencil_outside_domain() {
        let w = FnField::new(1, |x: &Point| x[0].ln()).with_domain(|x| x[0] > 0.0);
        assert!(matches!(harmonic_residual(&w, &pt(&[5e-4]), 1e-3), Err(Error::InadmissibleStencil)));
    }

    #[test]
    fn sign_examples() {
        assert_eq!(sign_convention(0.0), 1);
        assert_eq!(sign_convention(-0.0), 1);
        assert_eq!(sign_convention(-3.5), -1);
        assert_eq!(sign_convention(1e-300), 1);
    }

    #[test]
    fn suites_pass_on_a_sphere() {
        let profile = Profile::constant(1.0).unwrap().with_base(2.0).unwrap();
        let field = CanonicalField::cylinder(
            Projection::new(SymMatrix::identity(3), 1e-12).unwrap(),
            pt(&[0.0, 0.0, 0.0]),
            1.0,
            profile,
        )
        .unwrap();
        let cfg = SuiteConfig { samples: 6, ..SuiteConfig::default() };
        for suite in [Suite::Flow, Suite::HessianEvolution, Suite::Harmonic, Suite::Isoparametric, Suite::Cartan] {
            let rep = run_suite(&field, suite, &cfg).unwrap();
            assert!(rep.passed, "{rep:?}");
        }
    }
}
