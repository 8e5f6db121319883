//! Scalar fields, differential jets and the pointwise operators
//! `|∇u|`, `Δu`, `Δ∞ᴺu`, `Δ₁u` and `𝓗v`.

mod canonical;
mod grid;
pub mod sampling;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use canonical::{make_field, BoxDomain, CanonicalField, DistanceField, FieldSpec, Geometry};
pub use grid::{GridField, GridHeader};

use crate::error::{Error, Result};
use crate::spectral::{Projection, SymMatrix};

pub type Point = DVector<f64>;

/// Gradient norms at or below this are treated as critical points.
pub const EPS_GRAD: f64 = 1e-12;

/// A scalar field `u: Ω ⊂ ℝⁿ → ℝ` that can be probed pointwise.
///
/// Implementations must be safe to evaluate from several threads at once.
pub trait ScalarField: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &Point) -> f64;

    fn admissible(&self, _x: &Point) -> bool {
        true
    }

    /// Exact jet, when the field knows one.
    fn analytic_jet(&self, _x: &Point) -> Option<Result<Jet>> {
        None
    }
}

impl<T: ScalarField + ?Sized> ScalarField for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &Point) -> f64 {
        (**self).value(x)
    }
    fn admissible(&self, x: &Point) -> bool {
        (**self).admissible(x)
    }
    fn analytic_jet(&self, x: &Point) -> Option<Result<Jet>> {
        (**self).analytic_jet(x)
    }
}

impl<T: ScalarField + ?Sized> ScalarField for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &Point) -> f64 {
        (**self).value(x)
    }
    fn admissible(&self, x: &Point) -> bool {
        (**self).admissible(x)
    }
    fn analytic_jet(&self, x: &Point) -> Option<Result<Jet>> {
        (**self).analytic_jet(x)
    }
}

type DomainFn = Box<dyn Fn(&Point) -> bool + Send + Sync>;

/// Black-box field backed by a closure.
pub struct FnField<F> {
    n: usize,
    f: F,
    domain: Option<DomainFn>,
}

impl<F: Fn(&Point) -> f64 + Send + Sync> FnField<F> {
    pub fn new(n: usize, f: F) -> Self {
        FnField { n, f, domain: None }
    }

    pub fn with_domain(mut self, admissible: impl Fn(&Point) -> bool + Send + Sync + 'static) -> Self {
        self.domain = Some(Box::new(admissible));
        self
    }
}

impl<F: Fn(&Point) -> f64 + Send + Sync> ScalarField for FnField<F> {
    fn dim(&self) -> usize {
        self.n
    }
    fn value(&self, x: &Point) -> f64 {
        (self.f)(x)
    }
    fn admissible(&self, x: &Point) -> bool {
        self.domain.as_ref().is_none_or(|d| d(x))
    }
}

/// `−u`.
pub struct Negated<F>(pub F);

impl<F: ScalarField> ScalarField for Negated<F> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn value(&self, x: &Point) -> f64 {
        -self.0.value(x)
    }
    fn admissible(&self, x: &Point) -> bool {
        self.0.admissible(x)
    }
    fn analytic_jet(&self, x: &Point) -> Option<Result<Jet>> {
        self.0.analytic_jet(x).map(|j| j.map(|j| j.negated()))
    }
}

/// `T∘u` for a one-variable map `T`; failures of `T` evaluate to NaN.
pub struct Composed<F, T> {
    pub field: F,
    pub map: T,
}

impl<F: ScalarField, T: Fn(f64) -> Result<f64> + Send + Sync> ScalarField for Composed<F, T> {
    fn dim(&self) -> usize {
        self.field.dim()
    }
    fn value(&self, x: &Point) -> f64 {
        (self.map)(self.field.value(x)).unwrap_or(f64::NAN)
    }
    fn admissible(&self, x: &Point) -> bool {
        self.field.admissible(x) && self.value(x).is_finite()
    }
}

/// Value, gradient and Hessian at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub x: Point,
    pub u: f64,
    pub grad: DVector<f64>,
    pub hess: SymMatrix,
}

impl Jet {
    pub fn negated(&self) -> Jet {
        Jet { x: self.x.clone(), u: -self.u, grad: -&self.grad, hess: self.hess.scaled(-1.0) }
    }
}

/// How jets are computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum JetMode {
    #[default]
    Analytic,
    /// Central differences; `h = None` picks `1e-4 · max(1, |x|)`.
    Fd { h: Option<f64> },
}

impl JetMode {
    pub fn fd() -> Self {
        JetMode::Fd { h: None }
    }

    pub fn is_fd(&self) -> bool {
        matches!(self, JetMode::Fd { .. })
    }
}

/// Default finite-difference step at `x`.
pub fn default_step(x: &Point) -> f64 {
    1e-4 * x.norm().max(1.0)
}

/// Jet of `field` at `x`.
pub fn jet<F: ScalarField + ?Sized>(field: &F, x: &Point, mode: JetMode) -> Result<Jet> {
    if x.len() != field.dim() {
        return Err(Error::DimensionMismatch { expected: field.dim(), found: x.len() });
    }
    match mode {
        JetMode::Analytic => match field.analytic_jet(x) {
            Some(j) => j,
            None => Err(Error::InvalidInput("field has no analytic jet; use finite differences".into())),
        },
        JetMode::Fd { h } => fd_jet(field, x, h.unwrap_or_else(|| default_step(x))),
    }
}

/// Central-difference jet, `O(h²)`. The Hessian uses the nested
/// four-point stencil off the diagonal and is symmetrized.
pub fn fd_jet<F: ScalarField + ?Sized>(field: &F, x: &Point, h: f64) -> Result<Jet> {
    let n = x.len();
    let min = 1e3 * f64::EPSILON * x.norm();
    if !(h > 0.0) || h < min {
        return Err(Error::StepTooSmall { h, min });
    }
    if !field.admissible(x) {
        return Err(Error::Inadmissible);
    }
    let eval = |p: &Point| -> Result<f64> {
        if !field.admissible(p) {
            return Err(Error::InadmissibleStencil);
        }
        let v = field.value(p);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite)
        }
    };
    let u0 = eval(x)?;
    let mut grad = DVector::zeros(n);
    let mut hess = DMatrix::zeros(n, n);
    let shifted = |pairs: &[(usize, f64)]| {
        let mut p = x.clone();
        for &(i, d) in pairs {
            p[i] += d;
        }
        p
    };
    for i in 0..n {
        let up = eval(&shifted(&[(i, h)]))?;
        let dn = eval(&shifted(&[(i, -h)]))?;
        grad[i] = (up - dn) / (2.0 * h);
        hess[(i, i)] = (up - 2.0 * u0 + dn) / (h * h);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let pp = eval(&shifted(&[(i, h), (j, h)]))?;
            let pm = eval(&shifted(&[(i, h), (j, -h)]))?;
            let mp = eval(&shifted(&[(i, -h), (j, h)]))?;
            let mm = eval(&shifted(&[(i, -h), (j, -h)]))?;
            let v = (pp - pm - mp + mm) / (4.0 * h * h);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    Ok(Jet { x: x.clone(), u: u0, grad, hess: SymMatrix::symmetrized(&hess)? })
}

/// Pointwise differential operators of a jet.
#[derive(Debug, Clone, PartialEq)]
pub struct Operators {
    pub gradnorm: f64,
    pub laplacian: f64,
    /// Normalized infinity-Laplacian `∇u 𝓗u ∇uᵀ/|∇u|²`.
    pub ninf: f64,
    /// 1-Laplacian `(Δu − Δ∞ᴺu)/|∇u|`, the mean curvature of the level set.
    pub onelap: f64,
    /// Hessian of `v = F∘u`: `(𝓗u − Δ∞ᴺu nnᵀ)/|∇u|` with `n = ∇u/|∇u|`.
    pub hess_v: SymMatrix,
    /// Unit normal `n`.
    pub normal: DVector<f64>,
}

pub fn operators(j: &Jet) -> Result<Operators> {
    operators_with(j, EPS_GRAD)
}

pub fn operators_with(j: &Jet, eps_grad: f64) -> Result<Operators> {
    let gradnorm = j.grad.norm();
    if !(gradnorm > eps_grad) {
        return Err(Error::CriticalPoint { gradnorm, eps: eps_grad });
    }
    let n = &j.grad / gradnorm;
    let h = j.hess.as_matrix();
    let laplacian = h.trace();
    let ninf = (n.transpose() * h * &n)[(0, 0)];
    let onelap = (laplacian - ninf) / gradnorm;
    let hv = (h - (&n * n.transpose()) * ninf) / gradnorm;
    Ok(Operators { gradnorm, laplacian, ninf, onelap, hess_v: SymMatrix::symmetrized(&hv)?, normal: n })
}

/// Uniformly random rank-`k` symmetric projection in `ℝⁿ`: Gram–Schmidt on
/// Gaussian columns, deterministic per seed.
pub fn random_projection(n: usize, k: usize, seed: u64) -> Result<Projection> {
    if k > n || n == 0 {
        return Err(Error::RankOutOfRange { n, k });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut frame = DMatrix::<f64>::zeros(n, k);
    let mut c = 0;
    while c < k {
        let mut v = DVector::<f64>::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        // two passes of modified Gram–Schmidt
        for _ in 0..2 {
            for p in 0..c {
                let col = frame.column(p);
                let d = col.dot(&v);
                v -= col * d;
            }
        }
        let norm = v.norm();
        if norm < 1e-8 {
            continue;
        }
        frame.set_column(c, &(v / norm));
        c += 1;
    }
    Projection::from_frame(&frame)
}
