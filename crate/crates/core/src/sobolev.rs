//! Analytics of sampled curves: finite differences, trapezoidal `L^q` norms,
//! the weak `L^p` quasinorm, `C^{k,gamma}` norms, metric speed, energies,
//! lengths and the semimetrics built from the pointwise quantities
//! `s0 = dist` and `s1 = matched derivative discrepancy`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::adspace::{dist, minimizing_permutations, rotation_distances, unit_root, UnorderedTuple};
use crate::error::{Error, Result};
use crate::tracking::{check_grid, CoefficientCurve, RootCurve};

/// Values that finite differences can combine.
pub trait FdValue: Clone + Send + Sync {
    /// `sum_k c_k v_k`.
    fn combine(terms: &[(f64, &Self)]) -> Self;

    /// Pointwise magnitude: absolute value, or Euclidean norm for vectors.
    fn magnitude(&self) -> f64;
}

impl FdValue for f64 {
    fn combine(terms: &[(f64, &Self)]) -> Self {
        terms.iter().map(|(c, v)| c * **v).sum()
    }

    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl FdValue for Complex64 {
    fn combine(terms: &[(f64, &Self)]) -> Self {
        terms.iter().map(|(c, v)| **v * *c).sum()
    }

    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

impl FdValue for Vec<Complex64> {
    fn combine(terms: &[(f64, &Self)]) -> Self {
        let n = terms.first().map_or(0, |t| t.1.len());
        (0..n)
            .map(|i| terms.iter().map(|(c, v)| v[i] * *c).sum())
            .collect()
    }

    fn magnitude(&self) -> f64 {
        self.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

impl FdValue for Vec<f64> {
    fn combine(terms: &[(f64, &Self)]) -> Self {
        let n = terms.first().map_or(0, |t| t.1.len());
        (0..n)
            .map(|i| terms.iter().map(|(c, v)| c * v[i]).sum())
            .collect()
    }

    fn magnitude(&self) -> f64 {
        self.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Samples `values[m] = f(grid[m])`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledFunction<T> {
    pub grid: Vec<f64>,
    pub values: Vec<T>,
}

impl<T: FdValue> SampledFunction<T> {
    pub fn new(grid: Vec<f64>, values: Vec<T>) -> Result<Self> {
        check_grid(&grid)?;
        if grid.len() != values.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for {} grid points",
                values.len(),
                grid.len()
            )));
        }
        Ok(SampledFunction { grid, values })
    }

    pub fn from_fn(grid: Vec<f64>, f: impl Fn(f64) -> T + Sync) -> Result<Self> {
        let values = grid.par_iter().map(|&x| f(x)).collect();
        Self::new(grid, values)
    }

    /// `|f|` pointwise.
    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(FdValue::magnitude).collect()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(FdValue::magnitude).fold(0.0, f64::max)
    }
}

/// Three-point derivative: central (exact for quadratics on any grid) in the
/// interior, one-sided second order at the end points.
pub fn fd_derivative<T: FdValue>(f: &SampledFunction<T>) -> Result<SampledFunction<T>> {
    let x = &f.grid;
    let v = &f.values;
    let n = x.len();
    if n < 3 {
        return Err(Error::InsufficientData(
            "finite differences need at least three grid points".into(),
        ));
    }
    let interior = |m: usize| {
        let h1 = x[m] - x[m - 1];
        let h2 = x[m + 1] - x[m];
        T::combine(&[
            (-h2 / (h1 * (h1 + h2)), &v[m - 1]),
            ((h2 - h1) / (h1 * h2), &v[m]),
            (h1 / (h2 * (h1 + h2)), &v[m + 1]),
        ])
    };
    let mut out = Vec::with_capacity(n);
    let (h1, h2) = (x[1] - x[0], x[2] - x[1]);
    out.push(T::combine(&[
        (-(2.0 * h1 + h2) / (h1 * (h1 + h2)), &v[0]),
        ((h1 + h2) / (h1 * h2), &v[1]),
        (-h1 / (h2 * (h1 + h2)), &v[2]),
    ]));
    out.extend((1..n - 1).into_par_iter().map(interior).collect::<Vec<_>>());
    let (h1, h2) = (x[n - 2] - x[n - 3], x[n - 1] - x[n - 2]);
    out.push(T::combine(&[
        (h2 / (h1 * (h1 + h2)), &v[n - 3]),
        (-(h1 + h2) / (h1 * h2), &v[n - 2]),
        ((2.0 * h2 + h1) / (h2 * (h1 + h2)), &v[n - 1]),
    ]));
    Ok(SampledFunction {
        grid: x.clone(),
        values: out,
    })
}

/// Trapezoid weights: each sample carries half of each adjacent cell.
pub fn trapezoid_weights(grid: &[f64]) -> Vec<f64> {
    let n = grid.len();
    let mut w = vec![0.0; n];
    for m in 0..n.saturating_sub(1) {
        let h = grid[m + 1] - grid[m];
        w[m] += 0.5 * h;
        w[m + 1] += 0.5 * h;
    }
    w
}

fn sorted_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

/// `(int_E |f|^q)^{1/q}` by the trapezoid rule, restricted to samples with
/// `mask[m]` when a mask is given.
pub fn lq_norm_masked(grid: &[f64], magnitudes: &[f64], q: f64, mask: Option<&[bool]>) -> f64 {
    let w = trapezoid_weights(grid);
    let terms = magnitudes
        .iter()
        .zip(&w)
        .enumerate()
        .filter(|(m, _)| mask.map_or(true, |e| e[*m]))
        .map(|(_, (f, w))| w * f.powf(q))
        .collect();
    sorted_sum(terms).powf(1.0 / q)
}

/// Trapezoidal `L^q` norm, `q >= 1`.
pub fn lq_norm<T: FdValue>(f: &SampledFunction<T>, q: f64) -> f64 {
    lq_norm_masked(&f.grid, &f.magnitudes(), q, None)
}

/// Weak `L^p` quasinorm `sup_r r |{|f| > r}|^{1/p}` of sampled data: with
/// `|f|` sorted decreasingly and trapezoid weights `w`, the maximum over `k`
/// of `f_(k) (w_1 + ... + w_k)^{1/p}`.
pub fn weak_lp_values(grid: &[f64], magnitudes: &[f64], p: f64) -> f64 {
    let w = trapezoid_weights(grid);
    let mut pairs: Vec<(f64, f64)> = magnitudes.iter().copied().zip(w).collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut cumulative = 0.0;
    let mut best: f64 = 0.0;
    for (f, w) in pairs {
        cumulative += w;
        best = best.max(f * cumulative.powf(1.0 / p));
    }
    best
}

pub fn weak_lp<T: FdValue>(f: &SampledFunction<T>, p: f64) -> f64 {
    weak_lp_values(&f.grid, &f.magnitudes(), p)
}

/// Index pairs for seminorm estimates: all consecutive pairs plus every pair
/// drawn from an evenly spaced subset, at most about `budget` in total.
pub fn sampled_pairs(len: usize, budget: usize) -> Vec<(usize, usize)> {
    if len < 2 {
        return Vec::new();
    }
    let all = len * (len - 1) / 2;
    if all <= budget {
        return (0..len)
            .flat_map(|i| (i + 1..len).map(move |j| (i, j)))
            .collect();
    }
    let spare = budget.saturating_sub(len - 1);
    let k = ((1.0 + (1.0 + 8.0 * spare as f64).sqrt()) / 2.0).floor() as usize;
    let k = k.clamp(2, len);
    let subset: Vec<usize> = (0..k)
        .map(|i| ((i as f64) * (len - 1) as f64 / (k - 1) as f64).round() as usize)
        .collect();
    let mut pairs: Vec<(usize, usize)> = (0..len - 1).map(|i| (i, i + 1)).collect();
    for a in 0..k {
        for b in a + 1..k {
            let (i, j) = (subset[a], subset[b]);
            if j > i + 1 {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

/// Pair budget for seminorm estimates.
pub const PAIR_BUDGET: usize = 1_000_000;

/// `sup |f(x) - f(y)| / |x - y|^gamma` over [`sampled_pairs`].
pub fn holder_seminorm<T: FdValue>(f: &SampledFunction<T>, gamma: f64) -> f64 {
    sampled_pairs(f.grid.len(), PAIR_BUDGET)
        .par_iter()
        .map(|&(i, j)| {
            let diff = T::combine(&[(1.0, &f.values[j]), (-1.0, &f.values[i])]);
            diff.magnitude() / (f.grid[j] - f.grid[i]).powf(gamma)
        })
        .reduce(|| 0.0, f64::max)
}

/// `||a_j||_{C^{k,gamma}} = max_{s <= k} sup |a_j^{(s)}| + |a_j^{(k)}|_{C^{0,gamma}}`
/// for each coefficient. Derivatives come from the curve's exact samples;
/// missing orders are obtained by repeated finite differences when
/// `allow_fd` is set.
pub fn ck_gamma_norm(curve: &CoefficientCurve, k: usize, gamma: f64, allow_fd: bool) -> Result<Vec<f64>> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::invalid("Hölder exponent must lie in (0, 1]"));
    }
    let exact = curve.derivative_orders();
    if k > exact && !allow_fd {
        return Err(Error::InsufficientData(format!(
            "order {k} derivatives requested, {exact} available"
        )));
    }
    let grid = curve.grid().to_vec();
    let d = curve.degree();
    let mut orders: Vec<SampledFunction<Vec<Complex64>>> = Vec::with_capacity(k + 1);
    orders.push(SampledFunction::new(grid.clone(), curve.samples().to_vec())?);
    for s in 1..=k {
        let next = match curve.derivative(s) {
            Some(v) => SampledFunction::new(grid.clone(), v.to_vec())?,
            None => fd_derivative(&orders[s - 1])?,
        };
        orders.push(next);
    }
    Ok((0..d)
        .map(|j| {
            let component = |f: &SampledFunction<Vec<Complex64>>| SampledFunction {
                grid: grid.clone(),
                values: f.values.iter().map(|v| v[j]).collect::<Vec<Complex64>>(),
            };
            let sup = orders
                .iter()
                .map(|f| component(f).sup_norm())
                .fold(0.0, f64::max);
            sup + holder_seminorm(&component(&orders[k]), gamma)
        })
        .collect())
}

/// Metric speed of a curve in the space of unordered tuples: symmetric
/// difference quotients of `dist`, one-sided at the end points.
pub fn metric_speed(grid: &[f64], curve: &[UnorderedTuple]) -> Result<SampledFunction<f64>> {
    check_grid(grid)?;
    if grid.len() != curve.len() {
        return Err(Error::GridMismatch("curve and grid lengths differ".into()));
    }
    let n = grid.len();
    if n < 3 {
        return Err(Error::InsufficientData("metric speed needs three grid points".into()));
    }
    let values = (0..n)
        .into_par_iter()
        .map(|m| {
            let (a, b) = (m.saturating_sub(1), (m + 1).min(n - 1));
            dist(&curve[a], &curve[b]).map(|v| v / (grid[b] - grid[a]))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(SampledFunction {
        grid: grid.to_vec(),
        values,
    })
}

/// `int |speed|^q`.
pub fn q_energy(grid: &[f64], curve: &[UnorderedTuple], q: f64) -> Result<f64> {
    Ok(lq_norm(&metric_speed(grid, curve)?, q).powf(q))
}

/// Polygonal length in `C^d`: `sum ||lambda(x_{m+1}) - lambda(x_m)||_2`.
pub fn length(rc: &RootCurve) -> f64 {
    polygonal_length(&rc.lambda)
}

/// Polygonal length of sampled root vectors, Euclidean in `C^d`.
pub fn polygonal_length(lambda: &[Vec<Complex64>]) -> f64 {
    sorted_sum(
        lambda
            .windows(2)
            .map(|w| {
                w[1].iter()
                    .zip(&w[0])
                    .map(|(a, b)| (a - b).norm_sqr())
                    .sum::<f64>()
                    .sqrt()
            })
            .collect(),
    )
}

/// Polygonal length in the metric of unordered tuples.
pub fn metric_length(curve: &[UnorderedTuple]) -> Result<f64> {
    let steps = curve
        .windows(2)
        .map(|w| dist(&w[0], &w[1]))
        .collect::<Result<Vec<_>>>()?;
    Ok(sorted_sum(steps))
}

/// Pointwise comparison of two root curves on a shared grid.
#[derive(Debug, Clone, Serialize)]
pub struct PairComparison {
    pub grid: Vec<f64>,
    pub s0: Vec<f64>,
    pub s1: Vec<f64>,
    /// False where `s1` is not a trustworthy derivative discrepancy: either a
    /// curve is not differentiable there (two roots coincide with different
    /// slopes; `s1` is then set to 0), or the derivative stencil straddles a
    /// near-collision of roots.
    pub defined: Vec<bool>,
}

impl PairComparison {
    /// CSV with columns `x,s0,s1,defined_flag`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,s0,s1,defined_flag\n");
        for m in 0..self.grid.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.grid[m], self.s0[m], self.s1[m], self.defined[m] as u8
            ));
        }
        out
    }
}

fn check_pair(grid_f: &[f64], grid_g: &[f64]) -> Result<()> {
    if grid_f != grid_g {
        return Err(Error::GridMismatch("curves are sampled on different grids".into()));
    }
    Ok(())
}

/// Smallest pairwise distance between the entries of `v`.
fn min_gap(v: &[Complex64]) -> f64 {
    let mut gap = f64::INFINITY;
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            gap = gap.min((v[i] - v[j]).norm());
        }
    }
    gap
}

/// Whether the three-point stencil at `m` sees well separated roots: the
/// smallest root gap exceeds ten times the neighbouring step lengths.
fn stencil_clean(lambda: &[Vec<Complex64>], m: usize) -> bool {
    let n = lambda.len();
    let (a, b) = (m.saturating_sub(1), (m + 1).min(n - 1));
    let step = |i: usize, j: usize| {
        lambda[i]
            .iter()
            .zip(&lambda[j])
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    };
    let local = step(a, m).max(step(m, b));
    (a..=b).all(|k| min_gap(&lambda[k]) > 10.0 * local)
}

/// First-order differentiability of the multi-valued curve at a sample:
/// entries that coincide (up to `slack`) must have equal derivatives.
fn differentiable(values: &[Complex64], derivs: &[Complex64], slack: f64) -> bool {
    let scale = 1.0 + values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let dscale = 1.0 + derivs.iter().map(|z| z.norm()).fold(0.0, f64::max);
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            if (values[i] - values[j]).norm() <= slack * scale
                && (derivs[i] - derivs[j]).norm() > slack.sqrt() * dscale
            {
                return false;
            }
        }
    }
    true
}

/// `s0` and `s1` from values and derivatives already sampled on `grid`.
///
/// `s1(x)` is the largest `(1/sqrt d) ||f'(x) - sigma g'(x)||` over the
/// permutations `sigma` that minimize `||f(x) - sigma g(x)||` up to
/// `slack * (1 + s0(x))`. Where either curve fails to be differentiable,
/// `s1` is undefined and reported as 0.
pub fn compare_samples(
    grid: &[f64],
    f: &[Vec<Complex64>],
    df: &[Vec<Complex64>],
    g: &[Vec<Complex64>],
    dg: &[Vec<Complex64>],
    slack: f64,
) -> Result<PairComparison> {
    let n = grid.len();
    if [f.len(), df.len(), g.len(), dg.len()].iter().any(|&l| l != n) {
        return Err(Error::GridMismatch("sample counts differ from the grid".into()));
    }
    let rows = (0..n)
        .into_par_iter()
        .map(|m| {
            let a = UnorderedTuple::new(f[m].clone())?;
            let b = UnorderedTuple::new(g[m].clone())?;
            let s0 = dist(&a, &b)?;
            let perms = minimizing_permutations(&a, &b, slack * (1.0 + s0))?;
            let d = f[m].len() as f64;
            if !differentiable(&f[m], &df[m], slack) || !differentiable(&g[m], &dg[m], slack) {
                return Ok((s0, 0.0, false));
            }
            let s1 = perms
                .iter()
                .map(|perm| {
                    let sq: f64 = perm
                        .iter()
                        .enumerate()
                        .map(|(i, &j)| (df[m][i] - dg[m][j]).norm_sqr())
                        .sum();
                    (sq / d).sqrt()
                })
                .fold(0.0, f64::max);
            Ok((s0, s1, stencil_clean(f, m) && stencil_clean(g, m)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PairComparison {
        grid: grid.to_vec(),
        s0: rows.iter().map(|r| r.0).collect(),
        s1: rows.iter().map(|r| r.1).collect(),
        defined: rows.iter().map(|r| r.2).collect(),
    })
}

/// Finite-difference derivative of a root curve.
pub fn root_derivative(rc: &RootCurve) -> Result<Vec<Vec<Complex64>>> {
    let f = SampledFunction::new(rc.grid.clone(), rc.lambda.clone())?;
    Ok(fd_derivative(&f)?.values)
}

/// `s0`, `s1` for two root curves on a shared grid.
pub fn s0s1(f: &RootCurve, g: &RootCurve, slack: f64) -> Result<PairComparison> {
    check_pair(&f.grid, &g.grid)?;
    if f.degree() != g.degree() {
        return Err(Error::DimensionMismatch {
            expected: f.degree(),
            found: g.degree(),
        });
    }
    let df = root_derivative(f)?;
    let dg = root_derivative(g)?;
    compare_samples(&f.grid, &f.lambda, &df, &g.lambda, &dg, slack)
}

/// `sup_E s0 + ||s1||_{L^q(E)}`; `E` is the whole grid when `mask` is `None`.
pub fn d1q(cmp: &PairComparison, mask: Option<&[bool]>, q: f64) -> f64 {
    let sup = cmp
        .s0
        .iter()
        .enumerate()
        .filter(|(m, _)| mask.map_or(true, |e| e[*m]))
        .map(|(_, &v)| v)
        .fold(0.0, f64::max);
    if mask.is_some_and(|e| !e.iter().any(|&b| b)) {
        return 0.0;
    }
    sup + lq_norm_masked(&cmp.grid, &cmp.s1, q, mask)
}

/// Radical analogue of [`s0s1`] for scalar solutions of `Z^d = g`:
/// `s0 = min_j |lambda - theta^j mu|` and `s1` the largest
/// `|lambda' - theta^j mu'|` over the minimizing exponents `j`.
pub fn s_rad(
    grid: &[f64],
    lambda: &[Complex64],
    mu: &[Complex64],
    d: usize,
    slack: f64,
) -> Result<PairComparison> {
    let dl = fd_derivative(&SampledFunction::new(grid.to_vec(), lambda.to_vec())?)?.values;
    let dm = fd_derivative(&SampledFunction::new(grid.to_vec(), mu.to_vec())?)?.values;
    if mu.len() != grid.len() {
        return Err(Error::GridMismatch("radical tracks have different lengths".into()));
    }
    let orbit = |z: Complex64, dz: Complex64| -> (Vec<Complex64>, Vec<Complex64>) {
        (0..d).map(|j| (unit_root(d, j) * z, unit_root(d, j) * dz)).unzip()
    };
    let rows: Vec<(f64, f64, bool)> = (0..grid.len())
        .into_par_iter()
        .map(|m| {
            let dists = rotation_distances(lambda[m], mu[m], d);
            let s0 = dists.iter().copied().fold(f64::INFINITY, f64::min);
            // A collapsed orbit moving away from 0 has no unordered derivative.
            let (lv, ld) = orbit(lambda[m], dl[m]);
            let (mv, md) = orbit(mu[m], dm[m]);
            if !differentiable(&lv, &ld, slack) || !differentiable(&mv, &md, slack) {
                return (s0, 0.0, false);
            }
            let limit = s0 + slack * (1.0 + s0);
            let s1 = dists
                .iter()
                .enumerate()
                .filter(|(_, &v)| v <= limit)
                .map(|(j, _)| (dl[m] - unit_root(d, j) * dm[m]).norm())
                .fold(0.0, f64::max);
            (s0, s1, true)
        })
        .collect();
    Ok(PairComparison {
        grid: grid.to_vec(),
        s0: rows.iter().map(|r| r.0).collect(),
        s1: rows.iter().map(|r| r.1).collect(),
        defined: rows.iter().map(|r| r.2).collect(),
    })
}

fn sup_pointwise_dist(a: &[UnorderedTuple], b: &[UnorderedTuple]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::GridMismatch("curves have different lengths".into()));
    }
    a.par_iter()
        .zip(b)
        .map(|(x, y)| dist(x, y))
        .try_reduce(|| 0.0, |p, q| Ok(p.max(q)))
}

/// `sup dist(Lambda1, Lambda2) + || |Lambda1'| - |Lambda2'| ||_{L^q}`.
pub fn dist_s(grid: &[f64], a: &[UnorderedTuple], b: &[UnorderedTuple], q: f64) -> Result<f64> {
    let sup = sup_pointwise_dist(a, b)?;
    let sa = metric_speed(grid, a)?;
    let sb = metric_speed(grid, b)?;
    let diff: Vec<f64> = sa.values.iter().zip(&sb.values).map(|(x, y)| x - y).collect();
    Ok(sup + lq_norm(&SampledFunction { grid: grid.to_vec(), values: diff }, q))
}

/// `sup dist(Lambda1, Lambda2) + |E_q(Lambda1) - E_q(Lambda2)|`.
pub fn dist_e(grid: &[f64], a: &[UnorderedTuple], b: &[UnorderedTuple], q: f64) -> Result<f64> {
    let sup = sup_pointwise_dist(a, b)?;
    Ok(sup + (q_energy(grid, a, q)? - q_energy(grid, b, q)?).abs())
}
