//! One-variable profile calculus.
//!
//! A [`Profile`] is the datum `f > 0` on an open interval with a base value
//! `C0`. From it we get `F(t) = ∫_{C0}^t ds/f(s)`, its inverse `U`, the
//! cylinder variants `F_k = (k−1)/C1 + F` and `U_k = F_k⁻¹`, the
//! constitutive Laplacian profile `g`, the transform `G` that makes `G∘u`
//! harmonic, and the unit-gradient harmonizer `G̃`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::quad::{self, adaptive_simpson, gauss_legendre, newton_bisect};

/// Panels used by the smooth (fixed-node) quadrature paths.
pub const SMOOTH_PANELS: usize = 4;
const INVERSE_XTOL: f64 = 1e-15;

/// Open interval endpoint pair. Endpoints may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::InvalidSpec(format!("interval ({lo}, {hi}) is empty")));
        }
        Ok(Interval { lo, hi })
    }

    pub fn real_line() -> Self {
        Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY }
    }

    pub fn positive() -> Self {
        Interval { lo: 0.0, hi: f64::INFINITY }
    }

    pub fn contains(&self, t: f64) -> bool {
        t > self.lo && t < self.hi
    }
}

/// Endpoint encoding: a JSON number or one of the strings `"inf"`, `"-inf"`.
fn ser_endpoint<S: Serializer>(v: f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v == f64::INFINITY {
        s.serialize_str("inf")
    } else if v == f64::NEG_INFINITY {
        s.serialize_str("-inf")
    } else {
        s.serialize_f64(v)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum EndpointRepr {
    Num(f64),
    Str(String),
}

fn endpoint_from(r: EndpointRepr) -> std::result::Result<f64, String> {
    match r {
        EndpointRepr::Num(v) => Ok(v),
        EndpointRepr::Str(s) => match s.trim() {
            "inf" | "+inf" | "Infinity" => Ok(f64::INFINITY),
            "-inf" | "-Infinity" => Ok(f64::NEG_INFINITY),
            other => Err(format!("bad interval endpoint {other:?}")),
        },
    }
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeSeq;
        struct E(f64);
        impl Serialize for E {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                ser_endpoint(self.0, s)
            }
        }
        let mut seq = s.serialize_seq(Some(2))?;
        seq.serialize_element(&E(self.lo))?;
        seq.serialize_element(&E(self.hi))?;
        seq.end()
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw: [EndpointRepr; 2] = Deserialize::deserialize(d)?;
        let [a, b] = raw;
        let lo = endpoint_from(a).map_err(serde::de::Error::custom)?;
        let hi = endpoint_from(b).map_err(serde::de::Error::custom)?;
        Interval::new(lo, hi).map_err(serde::de::Error::custom)
    }
}

/// Piecewise cubic Hermite table for `f`, with cumulative integrals of `1/f`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    t: Vec<f64>,
    f: Vec<f64>,
    df: Vec<f64>,
    /// `cum[i] = ∫_{t_0}^{t_i} ds/f(s)`
    cum: Vec<f64>,
    slopes_given: bool,
}

impl Table {
    /// Build from nodes. Without `df` the slopes come from the monotone
    /// (Fritsch–Carlson / PCHIP) rule, which keeps every piece between its
    /// endpoint values and hence positive.
    pub fn new(t: Vec<f64>, f: Vec<f64>, df: Option<Vec<f64>>) -> Result<Self> {
        let n = t.len();
        if n < 2 {
            return Err(Error::InvalidSpec("tabulated profile needs at least two nodes".into()));
        }
        if f.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: f.len() });
        }
        if t.iter().chain(&f).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        if t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSpec("tabulated nodes must be strictly increasing".into()));
        }
        if f.iter().any(|&v| v <= 0.0) {
            return Err(Error::InvalidSpec("tabulated f must be positive".into()));
        }
        let slopes_given = df.is_some();
        let df = match df {
            Some(d) => {
                if d.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, found: d.len() });
                }
                if d.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite);
                }
                d
            }
            None => pchip_slopes(&t, &f),
        };
        let mut table = Table { t, f, df, cum: vec![0.0; n], slopes_given };
        for i in 1..n {
            let piece = gauss_legendre(|s| 1.0 / table.eval(s).0, table.t[i - 1], table.t[i], 1);
            table.cum[i] = table.cum[i - 1] + piece;
        }
        Ok(table)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.f
    }

    pub fn slopes(&self) -> &[f64] {
        &self.df
    }

    pub fn span(&self) -> (f64, f64) {
        (self.t[0], self.t[self.t.len() - 1])
    }

    fn piece(&self, t: f64) -> usize {
        let n = self.t.len();
        self.t.partition_point(|&x| x <= t).clamp(1, n - 1) - 1
    }

    /// `(f(t), f'(t))` from the Hermite cubic of the containing piece.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let i = self.piece(t);
        let h = self.t[i + 1] - self.t[i];
        let s = (t - self.t[i]) / h;
        let (y0, y1) = (self.f[i], self.f[i + 1]);
        let (m0, m1) = (self.df[i] * h, self.df[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let v = h00 * y0 + h10 * m0 + h01 * y1 + h11 * m1;
        let d00 = 6.0 * s2 - 6.0 * s;
        let d10 = 3.0 * s2 - 4.0 * s + 1.0;
        let d01 = -6.0 * s2 + 6.0 * s;
        let d11 = 3.0 * s2 - 2.0 * s;
        let dv = (d00 * y0 + d10 * m0 + d01 * y1 + d11 * m1) / h;
        (v, dv)
    }

    /// `∫_{t_0}^t ds/f(s)`; smooth in `t` within each piece.
    fn cumulative(&self, t: f64) -> f64 {
        let i = self.piece(t);
        self.cum[i] + gauss_legendre(|s| 1.0 / self.eval(s).0, self.t[i], t, 1)
    }
}

fn pchip_slopes(t: &[f64], f: &[f64]) -> Vec<f64> {
    let n = t.len();
    let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (f[i + 1] - f[i]) / h[i]).collect();
    if n == 2 {
        return vec![delta[0]; 2];
    }
    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        if delta[k - 1] * delta[k] <= 0.0 {
            d[k] = 0.0;
        } else {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
        }
    }
    let edge = |h0: f64, h1: f64, m0: f64, m1: f64| {
        let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
        if d.signum() != m0.signum() || m0 == 0.0 {
            0.0
        } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
            3.0 * m0
        } else {
            d
        }
    };
    d[0] = edge(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = edge(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

/// The functional form of `f`.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// `f ≡ a`
    Constant { a: f64 },
    /// `f(t) = a + b t`
    Affine { a: f64, b: f64 },
    /// `f(t) = a t^p` on a subinterval of `(0, ∞)`
    Power { a: f64, p: f64 },
    Tabulated(Table),
}

/// The datum `f > 0` on an open interval with base value `C0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileSpec", into = "ProfileSpec")]
pub struct Profile {
    family: Family,
    interval: Interval,
    c0: f64,
    /// `∫_{t_0}^{C0} 1/f` for tabulated profiles.
    offset: f64,
}

impl Profile {
    pub fn new(family: Family, interval: Interval, c0: f64) -> Result<Self> {
        if !interval.contains(c0) {
            return Err(Error::InvalidSpec(format!("C0 = {c0} is not inside ({}, {})", interval.lo, interval.hi)));
        }
        match &family {
            Family::Constant { a } => {
                if !(*a > 0.0 && a.is_finite()) {
                    return Err(Error::InvalidSpec("constant profile needs a > 0".into()));
                }
            }
            Family::Affine { a, b } => {
                if !(a.is_finite() && b.is_finite()) {
                    return Err(Error::NonFinite);
                }
                for e in [interval.lo, interval.hi] {
                    let v = if e.is_infinite() { if *b == 0.0 { *a } else { b * e } } else { a + b * e };
                    if v < -1e-12 * (a.abs() + (b * e).abs()) {
                        return Err(Error::InvalidSpec(format!("affine f is negative at interval endpoint {e}")));
                    }
                }
            }
            Family::Power { a, p } => {
                if !(*a > 0.0 && a.is_finite() && p.is_finite()) {
                    return Err(Error::InvalidSpec("power profile needs a > 0 and finite p".into()));
                }
                if interval.lo < 0.0 {
                    return Err(Error::InvalidSpec("power profile interval must lie in (0, inf)".into()));
                }
            }
            Family::Tabulated(table) => {
                let (t0, tn) = table.span();
                if interval.lo < t0 || interval.hi > tn {
                    return Err(Error::InvalidSpec(format!(
                        "interval ({}, {}) exceeds the table span [{t0}, {tn}]",
                        interval.lo, interval.hi
                    )));
                }
            }
        }
        let mut p = Profile { family, interval, c0, offset: 0.0 };
        if let Family::Tabulated(table) = &p.family {
            p.offset = table.cumulative(c0);
        }
        for t in p.probe_points() {
            let v = p.f(t);
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidSpec(format!("f({t}) = {v} is not positive")));
            }
        }
        Ok(p)
    }

    pub fn constant(a: f64) -> Result<Self> {
        Self::new(Family::Constant { a }, Interval::real_line(), 0.0)
    }

    /// Tabulated profile on the full node span with `C0` inside it.
    pub fn tabulated(t: Vec<f64>, f: Vec<f64>, df: Option<Vec<f64>>, c0: f64) -> Result<Self> {
        let table = Table::new(t, f, df)?;
        let (lo, hi) = table.span();
        Self::new(Family::Tabulated(table), Interval::new(lo, hi)?, c0)
    }

    /// Same profile with a different base value.
    pub fn with_base(&self, c0: f64) -> Result<Self> {
        Self::new(self.family.clone(), self.interval, c0)
    }

    fn probe_points(&self) -> Vec<f64> {
        let Interval { lo, hi } = self.interval;
        let mut pts = vec![self.c0];
        match &self.family {
            Family::Tabulated(table) => {
                for w in table.nodes().windows(2) {
                    for j in 1..8 {
                        let t = w[0] + (w[1] - w[0]) * j as f64 / 8.0;
                        if self.interval.contains(t) {
                            pts.push(t);
                        }
                    }
                }
            }
            _ => {
                for j in 1..16 {
                    let frac = j as f64 / 16.0;
                    let t = match (lo.is_finite(), hi.is_finite()) {
                        (true, true) => lo + (hi - lo) * frac,
                        (true, false) => lo + (self.c0 - lo) * 4.0 * frac,
                        (false, true) => hi - (hi - self.c0) * 4.0 * frac,
                        (false, false) => self.c0 + (frac - 0.5) * 32.0,
                    };
                    if self.interval.contains(t) {
                        pts.push(t);
                    }
                }
            }
        }
        pts
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn base(&self) -> f64 {
        self.c0
    }

    pub fn contains(&self, t: f64) -> bool {
        self.interval.contains(t)
    }

    pub fn f(&self, t: f64) -> f64 {
        match &self.family {
            Family::Constant { a } => *a,
            Family::Affine { a, b } => a + b * t,
            Family::Power { a, p } => a * t.powf(*p),
            Family::Tabulated(tab) => tab.eval(t).0,
        }
    }

    pub fn df(&self, t: f64) -> f64 {
        match &self.family {
            Family::Constant { .. } => 0.0,
            Family::Affine { b, .. } => *b,
            Family::Power { a, p } => a * p * t.powf(p - 1.0),
            Family::Tabulated(tab) => tab.eval(t).1,
        }
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(Error::OutOfDomain { value: t, lo: self.interval.lo, hi: self.interval.hi })
        }
    }

    /// `F` without a domain check; endpoint values are the one-sided limits.
    fn primitive_raw(&self, t: f64) -> f64 {
        let c0 = self.c0;
        match &self.family {
            Family::Constant { a } => (t - c0) / a,
            Family::Affine { a, b } => {
                if *b == 0.0 {
                    (t - c0) / a
                } else {
                    (b * (t - c0) / (a + b * c0)).ln_1p() / b
                }
            }
            Family::Power { a, p } => {
                if *p == 1.0 {
                    (t / c0).ln() / a
                } else {
                    // (t^e − c0^e)/e without cancellation for p near 1
                    let e = 1.0 - p;
                    c0.powf(e) * (e * (t / c0).ln()).exp_m1() / (a * e)
                }
            }
            Family::Tabulated(tab) => tab.cumulative(t) - self.offset,
        }
    }

    /// `F(t) = ∫_{C0}^t ds/f(s)`.
    pub fn primitive(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        Ok(self.primitive_raw(t))
    }

    /// `F(t)` computed by adaptive Simpson, independent of the closed forms.
    pub fn primitive_by_quadrature(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        adaptive_simpson(|s| 1.0 / self.f(s), self.c0, t, quad::SIMPSON_TOL)
    }

    /// Limits of `F` at the interval endpoints (possibly infinite).
    pub fn primitive_limits(&self) -> (f64, f64) {
        // an endpoint where f vanishes can round to ln of a tiny negative number
        let lo = self.primitive_raw(self.interval.lo);
        let hi = self.primitive_raw(self.interval.hi);
        (if lo.is_nan() { f64::NEG_INFINITY } else { lo }, if hi.is_nan() { f64::INFINITY } else { hi })
    }

    /// `U = F⁻¹`.
    pub fn inverse_primitive(&self, s: f64) -> Result<f64> {
        let (lo, hi) = self.primitive_limits();
        if !(s > lo && s < hi) {
            return Err(Error::OutOfRange { value: s, lo, hi });
        }
        let c0 = self.c0;
        let t = match &self.family {
            Family::Constant { a } => c0 + a * s,
            Family::Affine { a, b } => {
                if *b == 0.0 {
                    c0 + a * s
                } else {
                    c0 + (a + b * c0) * (b * s).exp_m1() / b
                }
            }
            Family::Power { a, p } => {
                if *p == 1.0 {
                    c0 * (a * s).exp()
                } else {
                    let e = 1.0 - p;
                    c0 * ((a * e * s / c0.powf(e)).ln_1p() / e).exp()
                }
            }
            Family::Tabulated(_) => self.inverse_primitive_numeric(s)?,
        };
        Ok(t)
    }

    /// `U(s)` by bracketing from `C0` towards the interval ends, bisection and
    /// Newton polish with `U' = f(U)`.
    pub fn inverse_primitive_numeric(&self, s: f64) -> Result<f64> {
        let (flo, fhi) = self.primitive_limits();
        if !(s > flo && s < fhi) {
            return Err(Error::OutOfRange { value: s, lo: flo, hi: fhi });
        }
        if s == 0.0 {
            return Ok(self.c0);
        }
        let Interval { lo, hi } = self.interval;
        let toward = if s > 0.0 { hi } else { lo };
        let mut inner = self.c0;
        let mut step = self.f(self.c0) * s.abs().max(1e-3);
        let outer = loop {
            let cand = if toward.is_finite() {
                let room = toward - inner;
                if room.abs() <= step {
                    // halve toward the finite endpoint; F at the endpoint already brackets s
                    0.5 * (inner + toward)
                } else {
                    inner + step * room.signum()
                }
            } else {
                inner + step * toward.signum()
            };
            let fc = self.primitive_raw(cand);
            if (s > 0.0 && fc >= s) || (s < 0.0 && fc <= s) {
                break cand;
            }
            if cand == inner {
                return Err(Error::OutOfRange { value: s, lo: flo, hi: fhi });
            }
            inner = cand;
            step *= 2.0;
        };
        let (a, b) = if s > 0.0 { (inner, outer) } else { (outer, inner) };
        newton_bisect(|t| (self.primitive_raw(t) - s, 1.0 / self.f(t)), a, b, 0.5 * (a + b), INVERSE_XTOL, 400)
    }

    /// `(U, U', U'')` at `s` for the transform `params`.
    pub fn inverse_jet(&self, params: &TransformParams, s: f64) -> Result<(f64, f64, f64)> {
        let t = inverse_map(self, params, s)?;
        let f = self.f(t);
        Ok((t, f, self.df(t) * f))
    }
}

/// On-disk form of a [`Profile`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileSpec {
    #[serde(flatten)]
    pub family: FamilySpec,
    pub interval: Interval,
    #[serde(rename = "C0")]
    pub c0: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "lowercase")]
pub enum FamilySpec {
    Constant { a: f64 },
    Affine { a: f64, b: f64 },
    Power { a: f64, p: f64 },
    Tabulated {
        t: Vec<f64>,
        f: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        df: Option<Vec<f64>>,
    },
}

impl TryFrom<ProfileSpec> for Profile {
    type Error = Error;

    fn try_from(spec: ProfileSpec) -> Result<Self> {
        let family = match spec.family {
            FamilySpec::Constant { a } => Family::Constant { a },
            FamilySpec::Affine { a, b } => Family::Affine { a, b },
            FamilySpec::Power { a, p } => Family::Power { a, p },
            FamilySpec::Tabulated { t, f, df } => Family::Tabulated(Table::new(t, f, df)?),
        };
        Profile::new(family, spec.interval, spec.c0)
    }
}

impl From<Profile> for ProfileSpec {
    fn from(p: Profile) -> Self {
        let family = match p.family {
            Family::Constant { a } => FamilySpec::Constant { a },
            Family::Affine { a, b } => FamilySpec::Affine { a, b },
            Family::Power { a, p } => FamilySpec::Power { a, p },
            Family::Tabulated(t) => FamilySpec::Tabulated {
                df: t.slopes_given.then(|| t.df.clone()),
                t: t.t,
                f: t.f,
            },
        };
        ProfileSpec { family, interval: p.interval, c0: p.c0 }
    }
}

/// Which conclusion of the classification a transform belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TransformParams {
    /// Affine level sets; `C1 = 0`.
    Plane,
    /// Level sets at distance `F_k` from a `(n−k)`-dimensional axis;
    /// `onelap` is the 1-Laplacian `C1 > 0` at the base point.
    Cylinder {
        k: usize,
        #[serde(rename = "C1")]
        onelap: f64,
    },
}

impl TransformParams {
    pub fn cylinder(k: usize, onelap: f64) -> Result<Self> {
        let p = TransformParams::Cylinder { k, onelap };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            TransformParams::Plane => Ok(()),
            TransformParams::Cylinder { k, onelap } => {
                if k < 2 {
                    Err(Error::InvalidSpec(format!("cylinder needs k >= 2, got {k}")))
                } else if !(onelap > 0.0 && onelap.is_finite()) {
                    Err(Error::InvalidSpec(format!("cylinder needs C1 > 0, got {onelap}")))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// `(k−1)/C1`, the value of `F_k` at the base point; zero for planes.
    pub fn base_offset(&self) -> f64 {
        match *self {
            TransformParams::Plane => 0.0,
            TransformParams::Cylinder { k, onelap } => (k - 1) as f64 / onelap,
        }
    }

    /// Principal curvature `c1 = C1/(k−1)` of the base level set; zero for planes.
    pub fn curvature(&self) -> f64 {
        match *self {
            TransformParams::Plane => 0.0,
            TransformParams::Cylinder { k, onelap } => onelap / (k - 1) as f64,
        }
    }
}

/// `F(t)` for planes, `F_k(t) = (k−1)/C1 + F(t)` for cylinders.
pub fn forward_map(p: &Profile, params: &TransformParams, t: f64) -> Result<f64> {
    params.validate()?;
    let base = p.primitive(t)?;
    match params {
        TransformParams::Plane => Ok(base),
        TransformParams::Cylinder { .. } => {
            let v = params.base_offset() + base;
            if v > 0.0 {
                Ok(v)
            } else {
                Err(Error::NonPositiveFk { t, value: v })
            }
        }
    }
}

/// Inverse of [`forward_map`]: `U(s)` or `U_k(s) = U(s − (k−1)/C1)`.
pub fn inverse_map(p: &Profile, params: &TransformParams, s: f64) -> Result<f64> {
    params.validate()?;
    match params {
        TransformParams::Plane => p.inverse_primitive(s),
        TransformParams::Cylinder { .. } => {
            if !(s > 0.0) {
                let (lo, hi) = p.primitive_limits();
                let off = params.base_offset();
                return Err(Error::OutOfRange { value: s, lo: (lo + off).max(0.0), hi: hi + off });
            }
            p.inverse_primitive(s - params.base_offset())
        }
    }
}

/// Laplacian profile forced by `f`: `g = f f'` for planes,
/// `g = f (f' + (k−1)/F_k)` for cylinders.
pub fn synth_g(p: &Profile, params: &TransformParams, t: f64) -> Result<f64> {
    let f = {
        p.check_domain(t)?;
        p.f(t)
    };
    let df = p.df(t);
    match params {
        TransformParams::Plane => Ok(f * df),
        TransformParams::Cylinder { k, .. } => {
            let fk = forward_map(p, params, t)?;
            Ok(f * (df + (*k - 1) as f64 / fk))
        }
    }
}

/// Transform `G(t) = ∫_{c1}^t exp(−∫_{c0}^τ g/f² ds) dτ`, which solves
/// `G'' f² + G' g = 0` and so turns an isoparametric `u` into a harmonic
/// `G∘u`.
///
/// Both integrals use fixed-node Gauss–Legendre panels, so `G` is a smooth
/// function of `t` and can sit underneath finite-difference stencils.
#[derive(Clone)]
pub struct ViscTransform<G> {
    profile: Profile,
    g: G,
    c0: f64,
    c1: f64,
    panels: usize,
    /// `∫_{c0}^{c1} g/f²`
    weight_at_c1: f64,
}

impl<G: Fn(f64) -> f64> ViscTransform<G> {
    pub fn new(profile: Profile, g: G, c0: f64, c1: f64) -> Result<Self> {
        for c in [c0, c1] {
            profile.check_domain(c)?;
        }
        let mut vt = ViscTransform { profile, g, c0, c1, panels: SMOOTH_PANELS, weight_at_c1: 0.0 };
        vt.weight_at_c1 = vt.weight_between(c0, c1);
        if !vt.weight_at_c1.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(vt)
    }

    /// `(c0, c1)`: the weight base and the zero of `G`.
    pub fn bases(&self) -> (f64, f64) {
        (self.c0, self.c1)
    }

    fn integrand(&self, s: f64) -> f64 {
        let f = self.profile.f(s);
        (self.g)(s) / (f * f)
    }

    fn weight_between(&self, a: f64, b: f64) -> f64 {
        gauss_legendre(|s| self.integrand(s), a, b, self.panels)
    }

    fn log_derivative(&self, t: f64) -> f64 {
        self.weight_at_c1 + self.weight_between(self.c1, t)
    }

    /// `G'(t) = exp(−∫_{c0}^t g/f²) > 0`.
    pub fn derivative(&self, t: f64) -> Result<f64> {
        self.profile.check_domain(t)?;
        let v = (-self.log_derivative(t)).exp();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite)
        }
    }

    /// `G''(t) = −G'(t) g(t)/f²(t)`.
    pub fn second_derivative(&self, t: f64) -> Result<f64> {
        Ok(-self.derivative(t)? * self.integrand(t))
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        self.profile.check_domain(t)?;
        let v = gauss_legendre(|tau| (-self.log_derivative(tau)).exp(), self.c1, t, self.panels);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite)
        }
    }

    /// `H = G⁻¹`.
    pub fn inverse(&self, w: f64) -> Result<f64> {
        if w == 0.0 {
            return Ok(self.c1);
        }
        let Interval { lo, hi } = self.profile.interval();
        let toward = if w > 0.0 { hi } else { lo };
        let mut inner = self.c1;
        let mut step = w.abs() / self.derivative(self.c1)?;
        let mut outer = None;
        for _ in 0..200 {
            let cand = if toward.is_finite() && (toward - inner).abs() <= step {
                0.5 * (inner + toward)
            } else {
                inner + step * if w > 0.0 { 1.0 } else { -1.0 }
            };
            let gv = self.value(cand)?;
            if (w > 0.0 && gv >= w) || (w < 0.0 && gv <= w) {
                outer = Some(cand);
                break;
            }
            inner = cand;
            step *= 2.0;
        }
        let outer = outer.ok_or(Error::OutOfRange { value: w, lo: f64::NAN, hi: f64::NAN })?;
        let (a, b) = if w > 0.0 { (inner, outer) } else { (outer, inner) };
        newton_bisect(
            |t| (self.value(t).unwrap_or(f64::NAN) - w, self.derivative(t).unwrap_or(f64::NAN)),
            a,
            b,
            0.5 * (a + b),
            1e-15,
            400,
        )
    }
}

/// One-shot evaluation of `G(t)`.
pub fn visc_transform<G: Fn(f64) -> f64>(p: &Profile, g: G, c0: f64, c1: f64, t: f64) -> Result<f64> {
    ViscTransform::new(p.clone(), g, c0, c1)?.value(t)
}

/// `G̃(t) = ∫_0^t Π_i (1 + c_i τ)^{−d_i} dτ`.
pub fn harmonize_unit(c: &[f64], d: &[usize], t: f64) -> Result<f64> {
    harmonize_check(c, d, t)?;
    if c.is_empty() {
        return Ok(t);
    }
    Ok(gauss_legendre(|tau| harmonize_weight(c, d, tau), 0.0, t, 2 * SMOOTH_PANELS))
}

/// `G̃'(t) = Π_i (1 + c_i t)^{−d_i}`.
pub fn harmonize_unit_derivative(c: &[f64], d: &[usize], t: f64) -> Result<f64> {
    harmonize_check(c, d, t)?;
    Ok(harmonize_weight(c, d, t))
}

fn harmonize_weight(c: &[f64], d: &[usize], tau: f64) -> f64 {
    c.iter().zip(d).map(|(ci, &di)| (1.0 + ci * tau).powi(-(di as i32))).product()
}

fn harmonize_check(c: &[f64], d: &[usize], t: f64) -> Result<()> {
    if c.len() != d.len() {
        return Err(Error::DimensionMismatch { expected: c.len(), found: d.len() });
    }
    // linear factors equal 1 at τ = 0, so positivity at t covers [0, t]
    for (index, ci) in c.iter().enumerate() {
        let value = 1.0 + ci * t;
        if !(value > 0.0) {
            return Err(Error::PoleCrossed { index, value });
        }
    }
    Ok(())
}
