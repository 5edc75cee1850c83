//! Monic complex polynomials `Z^d + a_1 Z^{d-1} + ... + a_d`.
//!
//! Coefficients are stored without the implicit leading one, in the order
//! `a_1, ..., a_d`. Roots are found all at once with the Aberth-Ehrlich
//! iteration. Multiple roots are not deflated: an `m`-fold root is only
//! recovered to roughly `eps^{1/m}` accuracy, which shows up as a cluster of
//! `m` nearby roots with small residuals.

use std::cmp::Ordering;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 500;
const MAX_RESTARTS: usize = 6;
const POLISH_SWEEPS: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolynomialRepr", into = "PolynomialRepr")]
pub struct MonicPolynomial {
    coeffs: Vec<Complex64>,
}

#[derive(Serialize, Deserialize)]
struct PolynomialRepr {
    d: usize,
    coeffs: Vec<Complex64>,
}

impl TryFrom<PolynomialRepr> for MonicPolynomial {
    type Error = Error;

    fn try_from(repr: PolynomialRepr) -> Result<Self> {
        if repr.d != repr.coeffs.len() {
            return Err(Error::DimensionMismatch {
                expected: repr.d,
                found: repr.coeffs.len(),
            });
        }
        MonicPolynomial::new(repr.coeffs)
    }
}

impl From<MonicPolynomial> for PolynomialRepr {
    fn from(p: MonicPolynomial) -> Self {
        PolynomialRepr {
            d: p.degree(),
            coeffs: p.coeffs,
        }
    }
}

/// The roots of one polynomial, repeated according to multiplicity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootMultiset {
    pub roots: Vec<Complex64>,
    /// `max |P(r)|` over the returned roots.
    pub residual: f64,
}

/// Factorization of a polynomial into factors with well separated root sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Splitting {
    pub factors: Vec<MonicPolynomial>,
    /// Largest coefficient deviation of the product of the factors from the input.
    pub residual: f64,
    /// Clustering distance that was used.
    pub threshold: f64,
}

impl MonicPolynomial {
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::invalid("a monic polynomial needs degree at least 1"));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("polynomial coefficients must be finite"));
        }
        Ok(MonicPolynomial { coeffs })
    }

    pub fn from_real(coeffs: &[f64]) -> Result<Self> {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len()
    }

    /// `a_1, ..., a_d`.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, &a| acc * z + a)
    }

    /// Value and first derivative by a joint Horner pass.
    pub fn eval_with_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        let mut p = Complex64::new(1.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for &a in &self.coeffs {
            dp = dp * z + p;
            p = p * z + a;
        }
        (p, dp)
    }

    /// `2 max_j |a_j|^{1/j}`; every root has modulus at most this value.
    pub fn cauchy_bound(&self) -> f64 {
        2.0 * self
            .coeffs
            .iter()
            .enumerate()
            .map(|(j, a)| a.norm().powf(1.0 / (j + 1) as f64))
            .fold(0.0, f64::max)
    }

    /// Scale used for residual acceptance: `max(1, cauchy_bound)^d`.
    pub fn residual_scale(&self) -> f64 {
        self.cauchy_bound().max(1.0).powi(self.degree() as i32)
    }

    /// All roots by Aberth-Ehrlich iteration.
    ///
    /// Succeeds when `max |P(r)| <= tol * max(1, cauchy_bound)^d`. Initial
    /// guesses lie on a circle of radius `cauchy_bound / 2`; if an attempt
    /// stalls the iteration restarts with a rotated starting phase.
    pub fn roots(&self, tol: f64) -> Result<RootMultiset> {
        if !(tol > 0.0) {
            return Err(Error::invalid("root tolerance must be positive"));
        }
        let d = self.degree();
        let bound = self.cauchy_bound();
        if bound == 0.0 {
            return Ok(RootMultiset {
                roots: vec![Complex64::new(0.0, 0.0); d],
                residual: 0.0,
            });
        }
        if d == 1 {
            let r = -self.coeffs[0];
            return Ok(RootMultiset {
                roots: vec![r],
                residual: self.eval(r).norm(),
            });
        }

        let target = tol * self.residual_scale();
        let mut best: Option<(Vec<Complex64>, f64)> = None;
        let mut iterations = 0;
        for restart in 0..MAX_RESTARTS {
            let (roots, residual, used) = self.aberth(0.5 * bound, restart);
            iterations += used;
            if residual <= target {
                return Ok(RootMultiset { roots, residual });
            }
            if best.as_ref().map_or(true, |(_, r)| residual < *r) {
                best = Some((roots, residual));
            }
        }
        Err(Error::NonConvergence {
            iterations,
            residual: best.map_or(f64::INFINITY, |(_, r)| r),
        })
    }

    fn initial_guesses(&self, radius: f64, restart: usize) -> Vec<Complex64> {
        let d = self.degree();
        let phase = 0.4 + restart as f64 * 0.618_033_988_75 * PI / d as f64;
        (0..d)
            .map(|k| {
                // Fixed radial jitter breaks the symmetry of e.g. Z^d - c.
                let jitter = 1.0 + 0.05 * (((k * 7 + 3) % 11) as f64 / 11.0 - 0.5);
                let angle = 2.0 * PI * k as f64 / d as f64 + phase;
                Complex64::from_polar(radius * jitter, angle)
            })
            .collect()
    }

    /// One Aberth run; returns (roots, max residual, iterations used).
    fn aberth(&self, radius: f64, restart: usize) -> (Vec<Complex64>, f64, usize) {
        let d = self.degree();
        let target = f64::EPSILON * self.residual_scale();
        let mut z = self.initial_guesses(radius, restart);
        let mut polish = 0;
        let mut iterations = 0;

        while iterations < MAX_ITERATIONS {
            iterations += 1;
            let mut max_step: f64 = 0.0;
            let mut max_residual: f64 = 0.0;
            for i in 0..d {
                let (p, dp) = self.eval_with_derivative(z[i]);
                max_residual = max_residual.max(p.norm());
                if p == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let mut repulsion = Complex64::new(0.0, 0.0);
                for j in 0..d {
                    if j != i {
                        let diff = z[i] - z[j];
                        if diff != Complex64::new(0.0, 0.0) {
                            repulsion += diff.inv();
                        }
                    }
                }
                let denom = dp - p * repulsion;
                let step = if denom.norm() > 0.0 && denom.is_finite() {
                    p / denom
                } else {
                    // Stationary point: nudge off it.
                    Complex64::from_polar(radius * 1e-3 + f64::EPSILON, i as f64)
                };
                if !step.is_finite() {
                    continue;
                }
                z[i] -= step;
                max_step = max_step.max(step.norm() / z[i].norm().max(1.0));
            }
            if max_step <= 4.0 * f64::EPSILON {
                break;
            }
            // Once every residual is tiny, a few more sweeps polish simple roots
            // to full precision; clustered roots only improve linearly.
            if max_residual <= 1e3 * target.max(f64::MIN_POSITIVE) || polish > 0 {
                polish += 1;
                if polish > POLISH_SWEEPS {
                    break;
                }
            }
        }
        let residual = z.iter().map(|&r| self.eval(r).norm()).fold(0.0, f64::max);
        (z, residual, iterations)
    }

    /// Shift to Tschirnhausen form.
    ///
    /// Returns `(q, shift)` with `q(Z) = p(Z + shift)` and `shift = -a_1/d`, so
    /// the roots of `q` are the roots of `p` plus `a_1/d`. The `Z^{d-1}`
    /// coefficient of `q` is set to exactly zero.
    pub fn tschirnhausen(&self) -> (MonicPolynomial, Complex64) {
        let d = self.degree();
        let shift = -self.coeffs[0] / d as f64;
        let mut c: Vec<Complex64> = std::iter::once(Complex64::new(1.0, 0.0))
            .chain(self.coeffs.iter().copied())
            .collect();
        // Taylor shift by repeated synthetic division.
        for i in 0..d {
            for j in 1..=(d - i) {
                let prev = c[j - 1];
                c[j] += shift * prev;
            }
        }
        c[1] = Complex64::new(0.0, 0.0);
        c.remove(0);
        (MonicPolynomial { coeffs: c }, shift)
    }

    /// Cluster the roots and return one factor per cluster.
    ///
    /// Roots closer than `gap_factor * tol * cauchy_bound` are linked
    /// (single linkage). Factors are ordered by the first root index of their
    /// cluster.
    pub fn split(&self, gap_factor: f64, tol: f64) -> Result<Splitting> {
        if !(gap_factor > 1.0) {
            return Err(Error::invalid("gap factor must exceed 1"));
        }
        let roots = self.roots(tol)?.roots;
        let threshold = gap_factor * tol * self.cauchy_bound();
        let clusters = single_linkage(&roots, threshold);
        let factors: Vec<MonicPolynomial> = clusters
            .iter()
            .map(|members| from_roots(&members.iter().map(|&i| roots[i]).collect::<Vec<_>>()))
            .collect::<Result<_>>()?;

        let mut product = vec![Complex64::new(1.0, 0.0)];
        for f in &factors {
            product = multiply_monic(&product, f.coeffs());
        }
        let residual = product[1..]
            .iter()
            .zip(&self.coeffs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        Ok(Splitting {
            factors,
            residual,
            threshold,
        })
    }
}

/// Multiply `c` (descending, leading 1 included) by the monic factor with
/// coefficients `f` (leading 1 omitted).
fn multiply_monic(c: &[Complex64], f: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); c.len() + f.len()];
    for (i, &ci) in c.iter().enumerate() {
        out[i] += ci;
        for (j, &fj) in f.iter().enumerate() {
            out[i + j + 1] += ci * fj;
        }
    }
    out
}

fn single_linkage(points: &[Complex64], threshold: f64) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (points[i] - points[j]).norm() <= threshold {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = clusters.len();
            clusters.push(Vec::new());
        }
        clusters[slot[r]].push(i);
    }
    clusters
}

/// Total order on complex numbers by modulus, then real part, then imaginary part.
pub(crate) fn modulus_order(a: &Complex64, b: &Complex64) -> Ordering {
    a.norm()
        .total_cmp(&b.norm())
        .then(a.re.total_cmp(&b.re))
        .then(a.im.total_cmp(&b.im))
}

/// The monic polynomial with the given roots, `a_j = (-1)^j e_j(roots)`.
///
/// Linear factors are multiplied in order of increasing modulus, so the
/// result does not depend on the order of `roots`.
pub fn from_roots(roots: &[Complex64]) -> Result<MonicPolynomial> {
    let mut sorted = roots.to_vec();
    sorted.sort_by(modulus_order);
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for r in sorted {
        c.push(Complex64::new(0.0, 0.0));
        for k in (1..c.len()).rev() {
            let prev = c[k - 1];
            c[k] -= r * prev;
        }
    }
    c.remove(0);
    MonicPolynomial::new(c)
}

/// Smallest `k in 2..=d` maximizing `|a_k|^{1/k}`, or `None` if all of
/// `a_2, ..., a_d` vanish. Intended for polynomials in Tschirnhausen form;
/// `a_1` is ignored.
pub fn dominant_index(p: &MonicPolynomial) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (idx, a) in p.coeffs().iter().enumerate().skip(1) {
        let k = idx + 1;
        let v = a.norm().powf(1.0 / k as f64);
        if v > 0.0 && best.map_or(true, |(_, b)| v > b) {
            best = Some((k, v));
        }
    }
    best.map(|(k, _)| k)
}
