//! Continuous root parameterizations along one-parameter coefficient curves.
//!
//! [`track`] solves for the roots at every grid point and orders each root
//! vector by an optimal assignment against its predecessor. Steps whose
//! unordered distance exceeds the a priori Hölder bound `H1 dx^{1/d}` are
//! bisected, which needs a way to evaluate the curve between samples: either
//! an analytic source or linear interpolation of the samples.

use std::fmt::Debug;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adspace::{
    assignment::hungarian, ordered_distance, squared_costs, unit_root, UnorderedTuple,
};
use crate::error::{Error, Result};
use crate::polycore::MonicPolynomial;

/// Maximum number of bisections of a single grid step.
pub const MAX_REFINEMENT_DEPTH: usize = 20;

/// Name and parameters of a builtin analytic family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyTag {
    pub name: String,
    pub params: serde_json::Map<String, serde_json::Value>,
}

/// A coefficient curve `x -> a(x)` with closed-form derivatives.
pub trait AnalyticCurve: Send + Sync + Debug {
    fn degree(&self) -> usize;

    fn coeffs(&self, x: f64) -> Vec<Complex64>;

    /// `a^{(order)}(x)` for `order >= 1`.
    fn coeff_derivs(&self, order: usize, x: f64) -> Vec<Complex64>;

    fn tag(&self) -> FamilyTag;
}

/// Coefficient vectors `a(x_m)` sampled on a grid of `[alpha, beta]`.
///
/// `derivs[s - 1][m]` holds `a^{(s)}(x_m)` when derivative samples are known.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "CurveRepr", into = "CurveRepr")]
pub struct CoefficientCurve {
    alpha: f64,
    beta: f64,
    grid: Vec<f64>,
    samples: Vec<Vec<Complex64>>,
    derivs: Option<Vec<Vec<Vec<Complex64>>>>,
    family: Option<FamilyTag>,
    source: Option<Arc<dyn AnalyticCurve>>,
}

#[derive(Serialize, Deserialize)]
struct CurveRepr {
    alpha: f64,
    beta: f64,
    grid: Vec<f64>,
    samples: Vec<Vec<Complex64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    derivs: Option<Vec<Vec<Vec<Complex64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    family: Option<FamilyTag>,
}

impl TryFrom<CurveRepr> for CoefficientCurve {
    type Error = Error;

    fn try_from(r: CurveRepr) -> Result<Self> {
        let curve = CoefficientCurve::from_samples(r.grid, r.samples)?;
        if curve.alpha != r.alpha || curve.beta != r.beta {
            return Err(Error::GridMismatch(
                "interval does not match the grid end points".into(),
            ));
        }
        let curve = match r.derivs {
            Some(d) => curve.with_derivs(d)?,
            None => curve,
        };
        Ok(CoefficientCurve {
            family: r.family,
            ..curve
        })
    }
}

impl From<CoefficientCurve> for CurveRepr {
    fn from(c: CoefficientCurve) -> Self {
        CurveRepr {
            alpha: c.alpha,
            beta: c.beta,
            grid: c.grid,
            samples: c.samples,
            derivs: c.derivs,
            family: c.family,
        }
    }
}

/// `points` equally spaced values from `alpha` to `beta` inclusive.
pub fn uniform_grid(alpha: f64, beta: f64, points: usize) -> Vec<f64> {
    let last = points.saturating_sub(1).max(1) as f64;
    (0..points)
        .map(|k| {
            if k + 1 == points {
                beta
            } else {
                alpha + (beta - alpha) * (k as f64 / last)
            }
        })
        .collect()
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::GridMismatch("a grid needs at least two points".into()));
    }
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::GridMismatch("grid points must be finite".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::GridMismatch("grid must be strictly increasing".into()));
    }
    Ok(())
}

impl CoefficientCurve {
    /// Wrap sampled data. The interval is `[grid[0], grid[last]]`.
    pub fn from_samples(grid: Vec<f64>, samples: Vec<Vec<Complex64>>) -> Result<Self> {
        check_grid(&grid)?;
        if samples.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} samples for {} grid points",
                samples.len(),
                grid.len()
            )));
        }
        let d = samples[0].len();
        if d == 0 {
            return Err(Error::invalid("degree must be at least 1"));
        }
        for s in &samples {
            if s.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: s.len(),
                });
            }
            if s.iter().any(|z| !z.is_finite()) {
                return Err(Error::invalid("coefficient samples must be finite"));
            }
        }
        Ok(CoefficientCurve {
            alpha: grid[0],
            beta: grid[grid.len() - 1],
            grid,
            samples,
            derivs: None,
            family: None,
            source: None,
        })
    }

    /// Attach exact derivative samples, `derivs[s - 1][m] = a^{(s)}(x_m)`.
    pub fn with_derivs(mut self, derivs: Vec<Vec<Vec<Complex64>>>) -> Result<Self> {
        for order in &derivs {
            if order.len() != self.grid.len() || order.iter().any(|v| v.len() != self.degree()) {
                return Err(Error::GridMismatch(
                    "derivative samples must match the coefficient samples".into(),
                ));
            }
        }
        self.derivs = (!derivs.is_empty()).then_some(derivs);
        Ok(self)
    }

    /// Sample an analytic curve on `grid`, with derivatives up to `max_order`.
    pub fn from_analytic(
        source: Arc<dyn AnalyticCurve>,
        grid: Vec<f64>,
        max_order: usize,
    ) -> Result<Self> {
        check_grid(&grid)?;
        let samples: Vec<_> = grid.par_iter().map(|&x| source.coeffs(x)).collect();
        let derivs: Vec<Vec<_>> = (1..=max_order)
            .map(|s| grid.par_iter().map(|&x| source.coeff_derivs(s, x)).collect())
            .collect();
        let family = source.tag();
        let curve = Self::from_samples(grid, samples)?.with_derivs(derivs)?;
        Ok(CoefficientCurve {
            family: Some(family),
            source: Some(source),
            ..curve
        })
    }

    pub fn degree(&self) -> usize {
        self.samples[0].len()
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.alpha, self.beta)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn samples(&self) -> &[Vec<Complex64>] {
        &self.samples
    }

    /// Exact derivative samples of order `order >= 1`, if known.
    pub fn derivative(&self, order: usize) -> Option<&[Vec<Complex64>]> {
        let derivs = self.derivs.as_ref()?;
        derivs.get(order.checked_sub(1)?).map(Vec::as_slice)
    }

    pub fn derivative_orders(&self) -> usize {
        self.derivs.as_ref().map_or(0, Vec::len)
    }

    pub fn family(&self) -> Option<&FamilyTag> {
        self.family.as_ref()
    }

    pub fn source(&self) -> Option<&Arc<dyn AnalyticCurve>> {
        self.source.as_ref()
    }

    /// `a(x)` for `x` in the interval; returns `true` when the value had to be
    /// linearly interpolated between samples.
    pub fn value_at(&self, x: f64) -> (Vec<Complex64>, bool) {
        if let Some(src) = &self.source {
            return (src.coeffs(x), false);
        }
        let k = self.grid.partition_point(|&g| g <= x);
        if k == 0 {
            return (self.samples[0].clone(), false);
        }
        if k == self.grid.len() {
            return (self.samples[k - 1].clone(), false);
        }
        let (x0, x1) = (self.grid[k - 1], self.grid[k]);
        if x == x0 {
            return (self.samples[k - 1].clone(), false);
        }
        let t = (x - x0) / (x1 - x0);
        let v = self.samples[k - 1]
            .iter()
            .zip(&self.samples[k])
            .map(|(a, b)| a * (1.0 - t) + b * t)
            .collect();
        (v, true)
    }

    pub fn polynomial_at(&self, m: usize) -> MonicPolynomial {
        MonicPolynomial::new(self.samples[m].clone()).expect("validated samples")
    }
}

/// A sampled continuous parameterization of the roots along a curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RootCurve {
    pub grid: Vec<f64>,
    /// `lambda[m][i] = lambda_i(x_m)`.
    pub lambda: Vec<Vec<Complex64>>,
    /// Unordered distance between consecutive root vectors.
    pub match_quality: Vec<f64>,
    /// Ordered minus unordered distance of each step; zero unless the step
    /// was refined.
    pub match_slack: Vec<f64>,
    /// Step distance divided by `H dx^{1/d}`.
    pub holder_margin: Vec<f64>,
    /// Largest `|P(lambda_i)|` over the grid.
    pub residual: f64,
    /// Number of bisections performed.
    pub refinements: usize,
    /// True when refinement evaluated the curve by linear interpolation.
    pub interpolated: bool,
}

impl RootCurve {
    pub fn degree(&self) -> usize {
        self.lambda.first().map_or(0, Vec::len)
    }

    /// The `i`-th component as a scalar curve.
    pub fn component(&self, i: usize) -> Vec<Complex64> {
        self.lambda.iter().map(|v| v[i]).collect()
    }
}

/// `[lambda(x_m)]` for every grid point.
pub fn unordered_samples(rc: &RootCurve) -> Vec<UnorderedTuple> {
    rc.lambda
        .iter()
        .map(|v| UnorderedTuple::new(v.clone()).expect("root vectors are finite"))
        .collect()
}

/// Reorder `roots` to follow `prev` by a minimum-cost assignment.
fn matched(prev: &[Complex64], roots: &[Complex64]) -> Vec<Complex64> {
    let perm = hungarian(&squared_costs(prev, roots));
    perm.iter().map(|&j| roots[j]).collect()
}

fn solve_at(coeffs: Vec<Complex64>, tol: f64) -> Result<(Vec<Complex64>, f64)> {
    let p = MonicPolynomial::new(coeffs)?;
    let r = p.roots(tol)?;
    Ok((r.roots, r.residual))
}

/// Track the roots of `P_{a(x)}` along the grid.
///
/// With a `seed`, the roots at `x_0` are ordered to match it.
pub fn track(curve: &CoefficientCurve, tol: f64, seed: Option<&[Complex64]>) -> Result<RootCurve> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tracking tolerance must be positive"));
    }
    let d = curve.degree();
    if let Some(s) = seed {
        if s.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: s.len(),
            });
        }
    }
    let (h, h1) = holder_constants(curve);

    // Roots at grid points do not depend on the ordering; solve them up front.
    let solved: Vec<(Vec<Complex64>, f64)> = curve
        .samples
        .par_iter()
        .map(|a| solve_at(a.clone(), tol))
        .collect::<Result<_>>()?;

    let grid = &curve.grid;
    let mut residual = solved.iter().map(|s| s.1).fold(0.0, f64::max);
    let first = match seed {
        Some(s) => matched(s, &solved[0].0),
        None => solved[0].0.clone(),
    };
    let mut lambda = Vec::with_capacity(grid.len());
    lambda.push(first);
    let mut match_quality = Vec::with_capacity(grid.len() - 1);
    let mut match_slack = Vec::with_capacity(grid.len() - 1);
    let mut holder_margin = Vec::with_capacity(grid.len() - 1);
    let mut stepper = Stepper {
        curve,
        tol,
        h1,
        d,
        refinements: 0,
        interpolated: false,
        residual: 0.0,
    };

    for m in 0..grid.len() - 1 {
        let prev = &lambda[m];
        let next = stepper.advance(prev, grid[m], grid[m + 1], &solved[m + 1].0, 0)?;
        let dx = grid[m + 1] - grid[m];
        let perm: Vec<usize> = (0..d).collect();
        let ordered = ordered_distance(prev, &next, &perm);
        let tuple_a = UnorderedTuple::new(prev.clone())?;
        let tuple_b = UnorderedTuple::new(next.clone())?;
        let step = crate::adspace::dist(&tuple_a, &tuple_b)?;
        match_quality.push(step);
        match_slack.push((ordered - step).max(0.0));
        let bound = h * dx.powf(1.0 / d as f64);
        holder_margin.push(if bound > 0.0 { step / bound } else { 0.0 });
        lambda.push(next);
    }
    residual = residual.max(stepper.residual);

    Ok(RootCurve {
        grid: grid.clone(),
        lambda,
        match_quality,
        match_slack,
        holder_margin,
        residual,
        refinements: stepper.refinements,
        interpolated: stepper.interpolated,
    })
}

struct Stepper<'a> {
    curve: &'a CoefficientCurve,
    tol: f64,
    h1: f64,
    d: usize,
    refinements: usize,
    interpolated: bool,
    residual: f64,
}

impl Stepper<'_> {
    /// Ordered roots at `right`, reached from `prev` at `left`.
    fn advance(
        &mut self,
        prev: &[Complex64],
        left: f64,
        right: f64,
        roots_right: &[Complex64],
        depth: usize,
    ) -> Result<Vec<Complex64>> {
        let next = matched(prev, roots_right);
        let perm: Vec<usize> = (0..self.d).collect();
        let step = ordered_distance(prev, &next, &perm);
        let allowed = self.h1 * (right - left).powf(1.0 / self.d as f64) + 10.0 * self.tol;
        if step <= allowed {
            return Ok(next);
        }
        if depth >= MAX_REFINEMENT_DEPTH {
            return Err(Error::RefinementLimit { left, right });
        }
        self.refinements += 1;
        let mid = 0.5 * (left + right);
        let (coeffs, interpolated) = self.curve.value_at(mid);
        self.interpolated |= interpolated;
        let (roots_mid, res) = solve_at(coeffs, self.tol)?;
        self.residual = self.residual.max(res);
        let at_mid = self.advance(prev, left, mid, &roots_mid, depth + 1)?;
        self.advance(&at_mid, mid, right, roots_right, depth + 1)
    }
}

/// `sup |f|` plus the Lipschitz seminorm estimated from exact derivative
/// samples (if any) and consecutive difference quotients.
fn scalar_lipschitz_norm(grid: &[f64], values: &[Complex64], derivs: Option<Vec<Complex64>>) -> (f64, f64) {
    let sup = values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut lip = derivs
        .map(|d| d.iter().map(|z| z.norm()).fold(0.0, f64::max))
        .unwrap_or(0.0);
    for m in 0..grid.len() - 1 {
        lip = lip.max((values[m + 1] - values[m]).norm() / (grid[m + 1] - grid[m]));
    }
    (sup, lip)
}

fn vector_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Hölder constants `(H, H1)` bounding `dist(Lambda(x), Lambda(y))` by
/// `H |x - y|^{1/d}`:
///
/// * `H = 4d max_j ||a_j||_{C^{0,1}}^{1/j}`,
/// * `H1 = 2d A^{1/d} (1 + B + ... + B^{d-1})^{1/d}` with `A` the Lipschitz
///   seminorm of the vector `a` and `B = 2 max_j ||a_j||_inf^{1/j}`.
///
/// Norms are estimated on the grid.
pub fn holder_constants(curve: &CoefficientCurve) -> (f64, f64) {
    let d = curve.degree();
    let grid = &curve.grid;
    let first = curve.derivative(1);

    let mut h_inner: f64 = 0.0;
    let mut sup_inner: f64 = 0.0;
    for j in 0..d {
        let values: Vec<Complex64> = curve.samples.iter().map(|a| a[j]).collect();
        let derivs = first.map(|dv| dv.iter().map(|a| a[j]).collect());
        let (sup, lip) = scalar_lipschitz_norm(grid, &values, derivs);
        let exponent = 1.0 / (j + 1) as f64;
        h_inner = h_inner.max((sup + lip).powf(exponent));
        sup_inner = sup_inner.max(sup.powf(exponent));
    }
    let h = 4.0 * d as f64 * h_inner;

    let mut lip_vec: f64 = first
        .map(|dv| dv.iter().map(|a| vector_norm(a)).fold(0.0, f64::max))
        .unwrap_or(0.0);
    for m in 0..grid.len() - 1 {
        let diff: Vec<Complex64> = curve.samples[m + 1]
            .iter()
            .zip(&curve.samples[m])
            .map(|(a, b)| a - b)
            .collect();
        lip_vec = lip_vec.max(vector_norm(&diff) / (grid[m + 1] - grid[m]));
    }
    let b = 2.0 * sup_inner;
    let geometric: f64 = (0..d).map(|k| b.powi(k as i32)).sum();
    let inv_d = 1.0 / d as f64;
    let h1 = 2.0 * d as f64 * lip_vec.powf(inv_d) * geometric.powf(inv_d);
    (h, h1)
}

/// Principal `d`-th root.
pub fn principal_root(g: Complex64, d: usize) -> Complex64 {
    if g == Complex64::new(0.0, 0.0) {
        return g;
    }
    Complex64::from_polar(g.norm().powf(1.0 / d as f64), g.arg() / d as f64)
}

/// Index of the branch `theta^j r` nearest `target`, and the ratio of the
/// nearest to the second-nearest distance.
fn nearest_branch(r: Complex64, target: Complex64, d: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    let mut second = f64::INFINITY;
    for j in 0..d {
        let dist = (unit_root(d, j) * r - target).norm();
        if dist < best.1 {
            second = best.1;
            best = (j, dist);
        } else if dist < second {
            second = dist;
        }
    }
    let ratio = if second > 0.0 { best.1 / second } else { 0.0 };
    (best.0, ratio)
}

/// Branch selection becomes unreliable when the nearest and second-nearest
/// candidate are this close in relative terms.
const AMBIGUITY_RATIO: f64 = 0.5;

/// Follow a continuous solution of `Z^d = g(x_m)`.
///
/// The first value is the `d`-th root of `g(x_0)` nearest `seed`; each later
/// value is the branch nearest its predecessor. When that choice is
/// ambiguous the step is subdivided, interpolating `g` linearly.
pub fn track_radical(g: &[Complex64], d: usize, seed: Complex64) -> Vec<Complex64> {
    let d = d.max(1);
    let Some(&g0) = g.first() else {
        return Vec::new();
    };
    let r0 = principal_root(g0, d);
    let mut out = Vec::with_capacity(g.len());
    out.push(unit_root(d, nearest_branch(r0, seed, d).0) * r0);
    for w in g.windows(2) {
        let prev = *out.last().expect("nonempty");
        out.push(radical_step(prev, w[0], w[1], d, 0));
    }
    out
}

fn radical_step(prev: Complex64, g_left: Complex64, g_right: Complex64, d: usize, depth: usize) -> Complex64 {
    let r = principal_root(g_right, d);
    let (j, ratio) = nearest_branch(r, prev, d);
    if ratio <= AMBIGUITY_RATIO || depth >= MAX_REFINEMENT_DEPTH || d == 1 {
        return unit_root(d, j) * r;
    }
    let g_mid = (g_left + g_right) * 0.5;
    let mid = radical_step(prev, g_left, g_mid, d, depth + 1);
    radical_step(mid, g_mid, g_right, d, depth + 1)
}
