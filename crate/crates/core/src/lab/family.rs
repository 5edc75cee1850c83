//! Builtin analytic curve families `n -> a_n` with closed-form derivatives.
//!
//! Radical families describe `Z^d = g_n(x)`, i.e. the coefficient vector
//! `(0, ..., 0, -g_n)`. Every family defines its limit member `n = inf`
//! explicitly.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::tracking::{AnalyticCurve, FamilyTag};

/// Index of a family member; `Limit` is the member at `n = inf`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NIndex {
    Finite(u64),
    Limit,
}

impl NIndex {
    /// `1/n`, zero for the limit member.
    pub fn reciprocal(self) -> f64 {
        match self {
            NIndex::Finite(n) => 1.0 / n as f64,
            NIndex::Limit => 0.0,
        }
    }

    pub fn finite(self) -> Option<u64> {
        match self {
            NIndex::Finite(n) => Some(n),
            NIndex::Limit => None,
        }
    }
}

impl fmt::Display for NIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NIndex::Finite(n) => write!(f, "{n}"),
            NIndex::Limit => f.write_str("inf"),
        }
    }
}

impl FromStr for NIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") || s == "∞" {
            return Ok(NIndex::Limit);
        }
        match s.parse::<u64>() {
            Ok(0) => Err(Error::invalid("family index n must be positive")),
            Ok(n) => Ok(NIndex::Finite(n)),
            Err(_) => Err(Error::invalid(format!("cannot parse family index {s:?}"))),
        }
    }
}

impl Serialize for NIndex {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            NIndex::Finite(n) => s.serialize_u64(*n),
            NIndex::Limit => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for NIndex {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match Value::deserialize(d)? {
            Value::Number(n) => n
                .as_u64()
                .filter(|&n| n > 0)
                .map(NIndex::Finite)
                .ok_or_else(|| serde::de::Error::custom("n must be a positive integer")),
            Value::String(s) => s.parse().map_err(serde::de::Error::custom),
            _ => Err(serde::de::Error::custom("n must be a positive integer or \"inf\"")),
        }
    }
}

/// Polynomial in `x` with complex coefficients, ascending powers.
pub type XPolynomial = Vec<Complex64>;

/// `p^{(order)}(x)`.
fn xpoly_derivative(p: &[Complex64], order: usize, x: f64) -> Complex64 {
    p.iter()
        .enumerate()
        .skip(order)
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, (k, &c)| {
            let falling: f64 = (k + 1 - order..=k).map(|v| v as f64).product();
            acc * x + c * falling
        })
}

#[derive(Debug, Clone, PartialEq)]
pub enum FamilyKind {
    /// `g_n = x + i/n`, or `x - i/n` for the conjugate family.
    RadicalShift { conjugate: bool },
    /// `g_n = x^2 + 1/n`.
    ParabolaShift,
    /// `g_n = x + n^{-p}` on `(0, 1)`, `p = d/(d-1)`.
    WeakNorm { p: f64 },
    /// `g_n = x + x |x|^{d-1} / n`: members are `C^{d-1,1}` but not `C^d`.
    KinkProbe,
    /// `a_n = a + b/n` for polynomial coefficient curves `a`, `b`.
    Perturbation { a: Vec<XPolynomial>, b: Vec<XPolynomial> },
}

/// A named one-parameter family of coefficient curves.
#[derive(Debug, Clone, PartialEq)]
pub struct Family {
    kind: FamilyKind,
    d: usize,
    interval: (f64, f64),
    scale: f64,
}

impl Family {
    fn radical(kind: FamilyKind, d: usize, interval: (f64, f64)) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("degree must be at least 1"));
        }
        Ok(Family {
            kind,
            d,
            interval,
            scale: 1.0,
        })
    }

    pub fn radical_shift(d: usize) -> Result<Self> {
        Self::radical(FamilyKind::RadicalShift { conjugate: false }, d, (-1.0, 1.0))
    }

    pub fn radical_shift_conjugate(d: usize) -> Result<Self> {
        Self::radical(FamilyKind::RadicalShift { conjugate: true }, d, (-1.0, 1.0))
    }

    pub fn parabola_shift(d: usize) -> Result<Self> {
        Self::radical(FamilyKind::ParabolaShift, d, (-1.0, 1.0))
    }

    pub fn weak_norm(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::invalid("the weak norm family needs d >= 2"));
        }
        let p = d as f64 / (d as f64 - 1.0);
        Self::radical(FamilyKind::WeakNorm { p }, d, (0.0, 1.0))
    }

    pub fn kink_probe(d: usize) -> Result<Self> {
        Self::radical(FamilyKind::KinkProbe, d, (-1.0, 1.0))
    }

    /// `a_n = a + b/n`; `a[j]`, `b[j]` are the ascending `x`-coefficients of
    /// the coefficient curves `a_{j+1}`, `b_{j+1}`.
    pub fn perturbation(a: Vec<XPolynomial>, b: Vec<XPolynomial>) -> Result<Self> {
        if a.is_empty() || a.len() != b.len() {
            return Err(Error::invalid(
                "perturbation needs nonempty curves a and b of equal length",
            ));
        }
        if a.iter().chain(&b).flatten().any(|z| !z.is_finite()) {
            return Err(Error::invalid("perturbation coefficients must be finite"));
        }
        let d = a.len();
        Ok(Family {
            kind: FamilyKind::Perturbation { a, b },
            d,
            interval: (-1.0, 1.0),
            scale: 1.0,
        })
    }

    /// Degree-3 default: `a` from `(Z^2 - x^2)(Z - 1/2)`, `b = (0, -1, 0)`.
    pub fn default_perturbation() -> Self {
        let c = |re: f64| Complex64::new(re, 0.0);
        let a = vec![vec![c(-0.5)], vec![c(0.0), c(0.0), c(-1.0)], vec![c(0.0), c(0.0), c(0.5)]];
        let b = vec![vec![c(0.0)], vec![c(-1.0)], vec![c(0.0)]];
        Self::perturbation(a, b).expect("valid builtin")
    }

    pub fn with_interval(mut self, alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha < beta) || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::invalid("interval must satisfy alpha < beta"));
        }
        self.interval = (alpha, beta);
        Ok(self)
    }

    /// Homogeneous rescaling `a_j -> t^j a_j`; roots scale by `t`.
    pub fn with_scale(mut self, t: f64) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::invalid("scale must be positive"));
        }
        self.scale = t;
        Ok(self)
    }

    pub fn degree(&self) -> usize {
        self.d
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn kind(&self) -> &FamilyKind {
        &self.kind
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            FamilyKind::RadicalShift { .. } => "radical_shift",
            FamilyKind::ParabolaShift => "parabola_shift",
            FamilyKind::WeakNorm { .. } => "weaknorm",
            FamilyKind::KinkProbe => "kink_probe",
            FamilyKind::Perturbation { .. } => "perturbation",
        }
    }

    /// True for families of the form `Z^d = g_n`.
    pub fn is_radical(&self) -> bool {
        !matches!(self.kind, FamilyKind::Perturbation { .. })
    }

    pub fn member(&self, n: NIndex) -> Member {
        Member {
            family: self.clone(),
            n,
        }
    }

    pub fn names() -> &'static [&'static str] {
        &["radical_shift", "parabola_shift", "weaknorm", "kink_probe", "perturbation"]
    }

    /// Build a family from its name and `key=value` style parameters:
    /// `d`, `alpha`, `beta`, `scale`, `conjugate` and, for `perturbation`,
    /// `a` and `b` as JSON arrays of `[re, im]` pairs per coefficient.
    pub fn from_params(name: &str, d: usize, params: &Map<String, Value>) -> Result<Self> {
        let family = match name {
            "radical_shift" => {
                if get_bool(params, "conjugate")?.unwrap_or(false) {
                    Self::radical_shift_conjugate(d)?
                } else {
                    Self::radical_shift(d)?
                }
            }
            "parabola_shift" => Self::parabola_shift(d)?,
            "weaknorm" => Self::weak_norm(d)?,
            "kink_probe" => Self::kink_probe(d)?,
            "perturbation" => match (params.get("a"), params.get("b")) {
                (Some(a), Some(b)) => Self::perturbation(parse_curves(a)?, parse_curves(b)?)?,
                (None, None) => Self::default_perturbation(),
                _ => return Err(Error::invalid("perturbation needs both a and b")),
            },
            other => {
                return Err(Error::invalid(format!(
                    "unknown family {other:?}; expected one of {}",
                    Self::names().join(", ")
                )))
            }
        };
        let (mut alpha, mut beta) = family.interval;
        if let Some(v) = get_f64(params, "alpha")? {
            alpha = v;
        }
        if let Some(v) = get_f64(params, "beta")? {
            beta = v;
        }
        let family = family.with_interval(alpha, beta)?;
        match get_f64(params, "scale")? {
            Some(t) => family.with_scale(t),
            None => Ok(family),
        }
    }

    fn tag(&self, n: NIndex) -> FamilyTag {
        let mut params = Map::new();
        params.insert("d".into(), json!(self.d));
        params.insert("n".into(), serde_json::to_value(n).expect("serializable"));
        params.insert("alpha".into(), json!(self.interval.0));
        params.insert("beta".into(), json!(self.interval.1));
        params.insert("scale".into(), json!(self.scale));
        match &self.kind {
            FamilyKind::RadicalShift { conjugate } => {
                params.insert("conjugate".into(), json!(conjugate));
            }
            FamilyKind::WeakNorm { p } => {
                params.insert("p".into(), json!(p));
            }
            FamilyKind::Perturbation { a, b } => {
                params.insert("a".into(), json!(a));
                params.insert("b".into(), json!(b));
            }
            FamilyKind::ParabolaShift | FamilyKind::KinkProbe => {}
        }
        FamilyTag {
            name: self.name().into(),
            params,
        }
    }

    /// Family descriptor without a member index.
    pub fn descriptor(&self) -> FamilyTag {
        let mut tag = self.tag(NIndex::Limit);
        tag.params.remove("n");
        tag
    }
}

fn get_f64(params: &Map<String, Value>, key: &str) -> Result<Option<f64>> {
    match params.get(key) {
        None => Ok(None),
        Some(Value::Number(n)) => Ok(n.as_f64()),
        Some(Value::String(s)) => s
            .parse()
            .map(Some)
            .map_err(|_| Error::invalid(format!("parameter {key} must be a number"))),
        Some(_) => Err(Error::invalid(format!("parameter {key} must be a number"))),
    }
}

fn get_bool(params: &Map<String, Value>, key: &str) -> Result<Option<bool>> {
    match params.get(key) {
        None => Ok(None),
        Some(Value::Bool(b)) => Ok(Some(*b)),
        Some(Value::String(s)) => s
            .parse()
            .map(Some)
            .map_err(|_| Error::invalid(format!("parameter {key} must be true or false"))),
        Some(_) => Err(Error::invalid(format!("parameter {key} must be true or false"))),
    }
}

fn parse_curves(v: &Value) -> Result<Vec<XPolynomial>> {
    let v = match v {
        Value::String(s) => serde_json::from_str(s)
            .map_err(|e| Error::invalid(format!("cannot parse coefficient curves: {e}")))?,
        other => other.clone(),
    };
    serde_json::from_value(v).map_err(|e| Error::invalid(format!("cannot parse coefficient curves: {e}")))
}

/// One member `a_n` of a [`Family`].
#[derive(Debug, Clone)]
pub struct Member {
    family: Family,
    n: NIndex,
}

impl Member {
    pub fn index(&self) -> NIndex {
        self.n
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn into_curve(self) -> Arc<dyn AnalyticCurve> {
        Arc::new(self)
    }

    /// Right-hand side `g_n(x)` of `Z^d = g_n`, scaled, for radical families.
    pub fn g(&self, x: f64) -> Option<Complex64> {
        self.g_derivative(0, x)
    }

    /// `g_n^{(order)}(x)` for radical families.
    pub fn g_derivative(&self, order: usize, x: f64) -> Option<Complex64> {
        let inv = self.n.reciprocal();
        let c = |re: f64| Complex64::new(re, 0.0);
        let d = self.family.d;
        let raw = match &self.family.kind {
            FamilyKind::RadicalShift { conjugate } => {
                let shift = Complex64::new(0.0, if *conjugate { -inv } else { inv });
                match order {
                    0 => c(x) + shift,
                    1 => c(1.0),
                    _ => c(0.0),
                }
            }
            FamilyKind::ParabolaShift => match order {
                0 => c(x * x + inv),
                1 => c(2.0 * x),
                2 => c(2.0),
                _ => c(0.0),
            },
            FamilyKind::WeakNorm { p } => {
                let shift = match self.n {
                    NIndex::Finite(n) => (n as f64).powf(-p),
                    NIndex::Limit => 0.0,
                };
                match order {
                    0 => c(x + shift),
                    1 => c(1.0),
                    _ => c(0.0),
                }
            }
            FamilyKind::KinkProbe => {
                // s-th derivative of x|x|^{d-1} is d!/(d-s)! |x|^{d-s} sgn(x)^{s+1}.
                let kink = if order <= d {
                    let falling: f64 = (d - order + 1..=d).map(|v| v as f64).product();
                    let sign = if x < 0.0 && order % 2 == 0 { -1.0 } else { 1.0 };
                    falling * x.abs().powi((d - order) as i32) * sign
                } else {
                    0.0
                };
                let base = match order {
                    0 => x,
                    1 => 1.0,
                    _ => 0.0,
                };
                c(base + inv * kink)
            }
            FamilyKind::Perturbation { .. } => return None,
        };
        Some(raw * self.family.scale.powi(d as i32))
    }

    fn coefficient(&self, order: usize, x: f64) -> Vec<Complex64> {
        let d = self.family.d;
        let t = self.family.scale;
        match &self.family.kind {
            FamilyKind::Perturbation { a, b } => {
                let inv = self.n.reciprocal();
                (0..d)
                    .map(|j| {
                        let v = xpoly_derivative(&a[j], order, x) + xpoly_derivative(&b[j], order, x) * inv;
                        v * t.powi(j as i32 + 1)
                    })
                    .collect()
            }
            _ => {
                let mut v = vec![Complex64::new(0.0, 0.0); d];
                v[d - 1] = -self.g_derivative(order, x).expect("radical family");
                v
            }
        }
    }
}

impl AnalyticCurve for Member {
    fn degree(&self) -> usize {
        self.family.d
    }

    fn coeffs(&self, x: f64) -> Vec<Complex64> {
        self.coefficient(0, x)
    }

    fn coeff_derivs(&self, order: usize, x: f64) -> Vec<Complex64> {
        self.coefficient(order, x)
    }

    fn tag(&self) -> FamilyTag {
        self.family.tag(self.n)
    }
}
