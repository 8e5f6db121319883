//! Local classification of a field at a probe point as a plane or a
//! generalized cylinder, with profile estimation and reconstruction residuals.
//!
//! The Hessian of the unit-gradient reparametrization `v = F∘u`,
//! `𝓗v = (𝓗u − Δ∞ᴺu nnᵀ)/|∇u|`, has the normal `n` as a null vector. Its
//! nonzero eigenvalues are the principal curvatures of the level set. No
//! nonzero curvature means a plane. One nonzero curvature `c1` of
//! multiplicity `k−1` means a cylinder with axis projection
//! `R0 = P1 + nnᵀ` and `x* = x0 − n/c1`. Two or more are impossible for an
//! isoparametric field and are rejected with Cartan diagnostics.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{jet, operators_with, CanonicalField, Jet, JetMode, Negated, Operators, Point, ScalarField, EPS_GRAD};
use crate::flow::gradient_flow;
use crate::profile::{synth_g, Profile, TransformParams};
use crate::spectral::{cartan_sum, sym_eig, Projection, SpectralDecomp, SymMatrix, DEFAULT_GROUP_TOL};

/// Eigenvalues with `|κ| ≤ tol_zero·(1 + ρ(𝓗v))` belong to the zero cluster.
pub const DEFAULT_TOL_ZERO: f64 = 1e-7;
/// Tolerance multiplier applied in finite-difference mode.
pub const FD_WIDENING: f64 = 1e3;
/// Gaps in `(tol, AMBIGUITY_FACTOR·tol]` make the grouping ambiguous.
pub const AMBIGUITY_FACTOR: f64 = 10.0;

/// Knobs of [`classify`].
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyConfig {
    pub mode: JetMode,
    /// Eigenvalue grouping tolerance, relative to `max(1, ρ)`.
    pub group_tol: f64,
    pub tol_zero: f64,
    pub eps_grad: f64,
    /// Number of random points used for reconstruction residuals; zero skips
    /// profile estimation entirely.
    pub residual_samples: usize,
    /// RK4 steps on each side of the probe when estimating the profile.
    pub profile_steps: usize,
    pub seed: u64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            mode: JetMode::Analytic,
            group_tol: DEFAULT_GROUP_TOL,
            tol_zero: DEFAULT_TOL_ZERO,
            eps_grad: EPS_GRAD,
            residual_samples: 8,
            profile_steps: 48,
            seed: 0,
        }
    }
}

impl ClassifyConfig {
    pub fn with_mode(mut self, mode: JetMode) -> Self {
        self.mode = mode;
        self
    }

    /// Tolerances actually used, after finite-difference widening.
    pub fn tolerances(&self) -> Tolerances {
        let widening = if self.mode.is_fd() { FD_WIDENING } else { 1.0 };
        Tolerances {
            mode: self.mode,
            group_tol: self.group_tol * widening,
            tol_zero: self.tol_zero * widening,
            eps_grad: self.eps_grad,
            widening,
        }
    }
}

/// Tolerances recorded in a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    #[serde(flatten)]
    pub mode: JetMode,
    pub group_tol: f64,
    pub tol_zero: f64,
    pub eps_grad: f64,
    /// `1` for analytic jets, `10³` in finite-difference mode.
    pub widening: f64,
}

/// Verdict of the classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case")]
pub enum Case {
    Plane,
    Cylinder { k: usize },
    Reject { reason: String },
}

/// Recovered geometric constants. `C1` is `(k−1)c1` for cylinders and the
/// measured 1-Laplacian otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportParams {
    pub x0: Vec<f64>,
    /// `u(x0)` of the classified (possibly negated) field.
    pub u0: f64,
    pub gradnorm: f64,
    #[serde(rename = "C1")]
    pub onelap: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<f64>>,
    #[serde(rename = "R0", default, skip_serializing_if = "Option::is_none")]
    pub r0: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_star: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

/// Spectral data behind the verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Raw eigenvalues of `𝓗v`, ascending.
    pub eigenvalues: Vec<f64>,
    /// Grouped eigenvalues and multiplicities.
    pub kappas: Vec<f64>,
    pub mults: Vec<usize>,
    pub gaps: Vec<f64>,
    pub merge_threshold: f64,
    pub zero_threshold: f64,
    pub laplacian: f64,
    pub ninf: f64,
    /// Cartan sums at each nonzero curvature; present for rejections.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cartan_sums: Option<Vec<f64>>,
    pub notes: Vec<String>,
}

/// Reconstruction error statistics from [`verify_reconstruction`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionResiduals {
    pub samples: usize,
    /// `|u − û|` over the samples.
    pub max_abs: f64,
    pub rms: f64,
    /// Level identity: `||v + 1/c1| − |R0(x−x*)||` for cylinders,
    /// `|v − qᵀ(x−x0)|` for planes, with `v = F̂∘u`.
    pub level_max: f64,
    pub level_rms: f64,
    /// `||∇u| − f̂(u)|`.
    pub gradnorm_max: f64,
    /// `|Δu − ĝ(u)|` with `ĝ` from the estimated profile.
    pub laplacian_max: f64,
    /// Range of `u` covered by the estimated profile.
    pub profile_range: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    #[serde(flatten)]
    pub case: Case,
    /// Whether `−u` was classified so that `C1 ≥ 0`.
    pub negated: bool,
    pub params: ReportParams,
    pub residuals: Option<ReconstructionResiduals>,
    pub tolerances: Tolerances,
    pub diagnostics: Diagnostics,
}

impl ClassificationReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn is_reject(&self) -> bool {
        matches!(self.case, Case::Reject { .. })
    }

    /// The unit normal of a plane report, oriented as `∇u` of the input field.
    pub fn input_normal(&self) -> Option<DVector<f64>> {
        let q = DVector::from_column_slice(self.params.q.as_ref()?);
        Some(if self.negated { -q } else { q })
    }

    /// Canonical field with the recovered geometry and the given profile.
    pub fn canonical_field(&self, profile: Profile) -> Result<CanonicalField> {
        let p = &self.params;
        let x0 = DVector::from_column_slice(&p.x0);
        match &self.case {
            Case::Plane => {
                let q = DVector::from_column_slice(p.q.as_ref().ok_or_else(|| missing("q"))?);
                CanonicalField::plane(q.normalize(), x0, profile)
            }
            Case::Cylinder { k } => {
                let rows = p.r0.as_ref().ok_or_else(|| missing("R0"))?;
                let n = rows.len();
                let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
                let r0 = Projection::from_parts(*k, SymMatrix::symmetrized(&m)?);
                let x_star = DVector::from_column_slice(p.x_star.as_ref().ok_or_else(|| missing("x_star"))?);
                let c1 = p.c1.ok_or_else(|| missing("c1"))?;
                CanonicalField::cylinder(r0, x_star, (*k - 1) as f64 * c1, profile)
            }
            Case::Reject { .. } => Err(Error::InvalidInput("rejected reports have no canonical field".into())),
        }
    }
}

fn missing(name: &str) -> Error {
    Error::InvalidInput(format!("report is missing parameter {name}"))
}

/// Samples of `f` along the gradient flow through a point.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileTrace {
    pub tau: Vec<f64>,
    pub points: Vec<Point>,
    /// `t = u(c(τ))`, strictly increasing.
    pub t: Vec<f64>,
    /// `f(t) = |∇u|`.
    pub f: Vec<f64>,
    /// `f'(t) = Δ∞ᴺu/|∇u|`.
    pub df: Vec<f64>,
}

/// Follow the gradient flow for `τ ∈ [−span, span]` with `steps` RK4 steps
/// per side and record `(u, |∇u|, Δ∞ᴺu/|∇u|)` at every node.
pub fn trace_profile<F: ScalarField + ?Sized>(
    u: &F,
    x0: &Point,
    span: f64,
    steps: usize,
    mode: JetMode,
) -> Result<ProfileTrace> {
    if !(span > 0.0 && span.is_finite()) {
        return Err(Error::InvalidInput(format!("profile span must be positive, got {span}")));
    }
    operators_with(&jet(u, x0, mode)?, EPS_GRAD)?;
    let forward = gradient_flow(u, x0, span, steps, mode)?;
    let backward = gradient_flow(u, x0, -span, steps, mode)?;
    let dt = span / steps as f64;
    let mut trace = ProfileTrace { tau: vec![], points: vec![], t: vec![], f: vec![], df: vec![] };
    let nodes = backward
        .iter()
        .enumerate()
        .skip(1)
        .rev()
        .map(|(i, p)| (-(i as f64) * dt, p))
        .chain(forward.iter().enumerate().map(|(i, p)| (i as f64 * dt, p)));
    for (tau, p) in nodes {
        let ops = operators_with(&jet(u, p, mode)?, EPS_GRAD)?;
        let value = u.value(p);
        trace.tau.push(tau);
        trace.points.push(p.clone());
        trace.t.push(value);
        trace.f.push(ops.gradnorm);
        trace.df.push(ops.ninf / ops.gradnorm);
    }
    if trace.t.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("u is not strictly increasing along the flow; reduce the span".into()));
    }
    Ok(trace)
}

/// Tabulated profile estimated along the gradient flow through `x0`, with
/// base value `C0 = u(x0)`. Node slopes are the exact `f' = Δ∞ᴺu/|∇u|`.
pub fn estimate_profile<F: ScalarField + ?Sized>(
    u: &F,
    x0: &Point,
    span: f64,
    steps: usize,
    mode: JetMode,
) -> Result<Profile> {
    let tr = trace_profile(u, x0, span, steps, mode)?;
    Profile::tabulated(tr.t, tr.f, Some(tr.df), u.value(x0))
}

struct Spectrum {
    dec: SpectralDecomp,
    zero_threshold: f64,
    nonzero: Vec<usize>,
}

fn analyse(hv: &SymMatrix, tol: &Tolerances) -> Result<Spectrum> {
    let dec = sym_eig(hv, tol.group_tol)?;
    let thr = dec.merge_threshold();
    let gaps = dec.gaps();
    if gaps.iter().any(|&g| g > thr && g <= AMBIGUITY_FACTOR * thr) {
        return Err(Error::GroupingAmbiguous { gaps });
    }
    let rho = dec.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let zero_threshold = tol.tol_zero * (1.0 + rho);
    let nonzero = (0..dec.len()).filter(|&i| dec.kappas[i].abs() > zero_threshold).collect();
    Ok(Spectrum { dec, zero_threshold, nonzero })
}

/// Classify `u` near `x0`.
///
/// Planes are reported with a canonical normal whose largest-magnitude
/// component is positive; `negated` records whether that required flipping
/// `u`. Otherwise `u` is negated exactly when `Δ₁u(x0) < 0`. Either way the
/// geometric parameters of `u` and `−u` coincide.
pub fn classify<F: ScalarField + ?Sized>(u: &F, x0: &Point, cfg: &ClassifyConfig) -> Result<ClassificationReport> {
    let tol = cfg.tolerances();
    let raw = jet(u, x0, cfg.mode)?;
    let raw_ops = operators_with(&raw, tol.eps_grad)?;
    let raw_spec = analyse(&raw_ops.hess_v, &tol)?;
    let negated = if raw_spec.nonzero.is_empty() {
        let n = &raw_ops.normal;
        let lead = (0..n.len()).max_by(|&a, &b| n[a].abs().total_cmp(&n[b].abs())).unwrap_or(0);
        n[lead] < 0.0
    } else {
        raw_ops.onelap < 0.0
    };
    let (j, ops, spec) = if negated {
        let j = raw.negated();
        let ops = operators_with(&j, tol.eps_grad)?;
        let spec = analyse(&ops.hess_v, &tol)?;
        (j, ops, spec)
    } else {
        (raw, raw_ops, raw_spec)
    };
    let mut report = assemble(&j, &ops, &spec, negated, tol);
    if cfg.residual_samples > 0 && !report.is_reject() {
        let samples = reconstruction_samples(u, x0, &spec, cfg);
        match verify_reconstruction(&report, u, &samples, cfg) {
            Ok(r) => report.residuals = Some(r),
            Err(e) => report.diagnostics.notes.push(format!("reconstruction residuals unavailable: {e}")),
        }
    }
    Ok(report)
}

fn assemble(j: &Jet, ops: &Operators, spec: &Spectrum, negated: bool, tol: Tolerances) -> ClassificationReport {
    let dec = &spec.dec;
    let n = &ops.normal;
    let x0: Vec<f64> = j.x.iter().copied().collect();
    let mut params = ReportParams {
        x0: x0.clone(),
        u0: j.u,
        gradnorm: ops.gradnorm,
        onelap: ops.onelap,
        q: None,
        r0: None,
        x_star: None,
        c1: None,
        k: None,
    };
    let mut diagnostics = Diagnostics {
        eigenvalues: dec.eigenvalues.clone(),
        kappas: dec.kappas.clone(),
        mults: dec.mults.clone(),
        gaps: dec.gaps(),
        merge_threshold: dec.merge_threshold(),
        zero_threshold: spec.zero_threshold,
        laplacian: ops.laplacian,
        ninf: ops.ninf,
        cartan_sums: None,
        notes: vec!["the domain is assumed connected; this is not tested from local data".into()],
    };
    let case = match spec.nonzero.as_slice() {
        [] => {
            params.q = Some(n.iter().copied().collect());
            Case::Plane
        }
        &[i] => {
            let c1 = dec.kappas[i];
            if c1 <= 0.0 {
                Case::Reject { reason: format!("the nonzero curvature {c1} has the wrong sign after orientation") }
            } else {
                let k = dec.mults[i] + 1;
                let r0 = dec.projections[i].as_matrix() + n * n.transpose();
                let r0 = (&r0 + r0.transpose()) * 0.5;
                let x_star = &j.x - n / c1;
                params.r0 = Some((0..r0.nrows()).map(|a| r0.row(a).iter().copied().collect()).collect());
                params.x_star = Some(x_star.iter().copied().collect());
                params.c1 = Some(c1);
                params.k = Some(k);
                params.onelap = (k - 1) as f64 * c1;
                Case::Cylinder { k }
            }
        }
        many => {
            let kappas: Vec<f64> = many.iter().map(|&i| dec.kappas[i]).collect();
            let mults: Vec<usize> = many.iter().map(|&i| dec.mults[i]).collect();
            let sums = (0..kappas.len()).map(|i| cartan_sum(&kappas, &mults, i).unwrap_or(f64::NAN)).collect();
            diagnostics.cartan_sums = Some(sums);
            Case::Reject {
                reason: format!(
                    "{} distinct nonzero principal curvatures {kappas:?}; an isoparametric field admits at most one",
                    many.len()
                ),
            }
        }
    };
    ClassificationReport { case, negated, params, residuals: None, tolerances: tol, diagnostics }
}

/// Seeded points within a quarter of the profile span around `x0`.
fn reconstruction_samples<F: ScalarField + ?Sized>(
    u: &F,
    x0: &Point,
    spec: &Spectrum,
    cfg: &ClassifyConfig,
) -> Vec<Point> {
    let radius = 0.5 * reconstruction_length(spec);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(cfg.residual_samples);
    for _ in 0..20 * cfg.residual_samples {
        if out.len() == cfg.residual_samples {
            break;
        }
        let dir = DVector::<f64>::from_fn(x0.len(), |_, _| StandardNormal.sample(&mut rng));
        let rho: f64 = rng.random_range(0.0..1.0);
        let x = x0 + dir.normalize() * (radius * rho);
        if u.admissible(&x) && u.value(&x).is_finite() {
            out.push(x);
        }
    }
    out
}

/// Arclength scale for profile estimation: `0.25/max(1, ρ(𝓗v))`.
fn reconstruction_length(spec: &Spectrum) -> f64 {
    let rho = spec.dec.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    0.25 / rho.max(1.0)
}

/// Compare `u` against the canonical field rebuilt from `rep`, with the
/// profile estimated along the flow through `rep.params.x0`.
pub fn verify_reconstruction<F: ScalarField + ?Sized>(
    rep: &ClassificationReport,
    u: &F,
    samples: &[Point],
    cfg: &ClassifyConfig,
) -> Result<ReconstructionResiduals> {
    if rep.is_reject() {
        return Err(Error::InvalidInput("cannot reconstruct a rejected classification".into()));
    }
    if samples.is_empty() {
        return Err(Error::InvalidInput("reconstruction needs at least one sample".into()));
    }
    let neg = Negated(u);
    let target: &dyn ScalarField = if rep.negated { &neg } else { &u };
    let x0 = DVector::from_column_slice(&rep.params.x0);
    let rho = rep.diagnostics.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let length = 0.25 / rho.max(1.0);
    let span = length / rep.params.gradnorm;
    let profile = estimate_profile(target, &x0, span, cfg.profile_steps.max(2), cfg.mode)?;
    let field = rep.canonical_field(profile.clone())?;
    let (tlo, thi) = (profile.interval().lo, profile.interval().hi);
    let params: TransformParams = *field.params();
    let level_offset = params.base_offset();

    let mut stats = ReconstructionResiduals {
        samples: samples.len(),
        max_abs: 0.0,
        rms: 0.0,
        level_max: 0.0,
        level_rms: 0.0,
        gradnorm_max: 0.0,
        laplacian_max: 0.0,
        profile_range: (tlo, thi),
    };
    for x in samples {
        let t = target.value(x);
        if !(t > tlo && t < thi) {
            return Err(Error::ProfileRangeExceeded { value: t, lo: tlo, hi: thi });
        }
        let err = (t - field.value(x)).abs();
        let v = profile.primitive(t)?;
        let r = field.level_coordinate(x);
        let level = match params {
            TransformParams::Plane => (v - r).abs(),
            TransformParams::Cylinder { .. } => ((v + level_offset).abs() - r).abs(),
        };
        let ops = operators_with(&jet(target, x, cfg.mode)?, EPS_GRAD)?;
        let grad_res = (ops.gradnorm - profile.f(t)).abs();
        let lap_res = (ops.laplacian - synth_g(&profile, &params, t)?).abs();
        stats.max_abs = stats.max_abs.max(err);
        stats.rms += err * err;
        stats.level_max = stats.level_max.max(level);
        stats.level_rms += level * level;
        stats.gradnorm_max = stats.gradnorm_max.max(grad_res);
        stats.laplacian_max = stats.laplacian_max.max(lap_res);
    }
    let m = samples.len() as f64;
    stats.rms = (stats.rms / m).sqrt();
    stats.level_rms = (stats.level_rms / m).sqrt();
    Ok(stats)
}

/// Knobs of [`isoparametric_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsoCheckConfig {
    /// Width of the `u`-bins.
    pub bin_width: f64,
    /// Allowed spread of `|∇u|` within a bin.
    pub tol_grad: f64,
    /// Allowed spread of `Δu` within a bin.
    pub tol_lap: f64,
    #[serde(flatten)]
    pub mode: JetMode,
}

impl Default for IsoCheckConfig {
    fn default() -> Self {
        IsoCheckConfig { bin_width: 1e-9, tol_grad: 1e-9, tol_lap: 1e-8, mode: JetMode::Analytic }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinStats {
    pub u_lo: f64,
    pub u_hi: f64,
    pub count: usize,
    pub grad_spread: f64,
    pub lap_spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsoCheckReport {
    pub bins: Vec<BinStats>,
    pub max_grad_spread: f64,
    pub max_lap_spread: f64,
    pub grad_flagged: bool,
    pub lap_flagged: bool,
    pub verdict: bool,
}

/// Test that `|∇u|` and `Δu` are single-valued functions of `u` on `samples`.
///
/// Samples are sorted by `u` and grouped greedily into bins of width
/// `bin_width`; within each bin the spreads of `|∇u|` and `Δu` must stay
/// below `tol_grad` and `tol_lap`.
pub fn isoparametric_check<F: ScalarField + ?Sized>(
    u: &F,
    samples: &[Point],
    cfg: &IsoCheckConfig,
) -> Result<IsoCheckReport> {
    if samples.len() < 2 {
        return Err(Error::InvalidInput("isoparametric check needs at least two samples".into()));
    }
    let mut rows = Vec::with_capacity(samples.len());
    for x in samples {
        let j = jet(u, x, cfg.mode)?;
        let ops = operators_with(&j, EPS_GRAD)?;
        rows.push((j.u, ops.gradnorm, ops.laplacian));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut bins = Vec::new();
    let mut start = 0;
    while start < rows.len() {
        let mut end = start + 1;
        while end < rows.len() && rows[end].0 - rows[start].0 <= cfg.bin_width {
            end += 1;
        }
        let spread = |sel: fn(&(f64, f64, f64)) -> f64| {
            let (lo, hi) = rows[start..end].iter().map(sel).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            hi - lo
        };
        bins.push(BinStats {
            u_lo: rows[start].0,
            u_hi: rows[end - 1].0,
            count: end - start,
            grad_spread: spread(|r| r.1),
            lap_spread: spread(|r| r.2),
        });
        start = end;
    }
    let max_grad_spread = bins.iter().fold(0.0f64, |m, b| m.max(b.grad_spread));
    let max_lap_spread = bins.iter().fold(0.0f64, |m, b| m.max(b.lap_spread));
    let grad_flagged = max_grad_spread > cfg.tol_grad;
    let lap_flagged = max_lap_spread > cfg.tol_lap;
    Ok(IsoCheckReport { bins, max_grad_spread, max_lap_spread, grad_flagged, lap_flagged, verdict: !(grad_flagged || lap_flagged) })
}
