//! Unordered `d`-tuples of complex numbers and their geometry.
//!
//! The distance between `[z]` and `[w]` is
//! `min_sigma (1/sqrt d) ||z - sigma w||_2`, computed exactly as an optimal
//! assignment with squared-distance costs. With the normalized counting
//! measures `(1/d) sum delta_{z_i}` this is the 2-Wasserstein distance, which
//! [`wasserstein2`] computes by a separate transport solver.

pub mod assignment;
pub mod transport;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polycore::{self, modulus_order, MonicPolynomial};

use assignment::{hungarian, CostMatrix};

/// A point of the space of unordered `d`-tuples. The stored order is
/// incidental; every function of the tuple is permutation invariant.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "TupleRepr", into = "TupleRepr")]
pub struct UnorderedTuple {
    values: Vec<Complex64>,
}

#[derive(Serialize, Deserialize)]
struct TupleRepr {
    d: usize,
    values: Vec<Complex64>,
}

impl TryFrom<TupleRepr> for UnorderedTuple {
    type Error = Error;

    fn try_from(repr: TupleRepr) -> Result<Self> {
        if repr.d != repr.values.len() {
            return Err(Error::DimensionMismatch {
                expected: repr.d,
                found: repr.values.len(),
            });
        }
        UnorderedTuple::new(repr.values)
    }
}

impl From<UnorderedTuple> for TupleRepr {
    fn from(t: UnorderedTuple) -> Self {
        TupleRepr {
            d: t.degree(),
            values: t.values,
        }
    }
}

impl UnorderedTuple {
    pub fn new(values: Vec<Complex64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("an unordered tuple needs at least one entry"));
        }
        if values.iter().any(|z| !z.is_finite()) {
            return Err(Error::invalid("tuple entries must be finite"));
        }
        Ok(UnorderedTuple { values })
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn degree(&self) -> usize {
        self.values.len()
    }

    /// A representative ordering.
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Representative sorted by modulus, then real and imaginary part.
    pub fn canonical(&self) -> Vec<Complex64> {
        let mut v = self.values.clone();
        v.sort_by(modulus_order);
        v
    }
}

/// Multiset equality.
impl PartialEq for UnorderedTuple {
    fn eq(&self, other: &Self) -> bool {
        self.canonical() == other.canonical()
    }
}

impl From<polycore::RootMultiset> for UnorderedTuple {
    fn from(r: polycore::RootMultiset) -> Self {
        UnorderedTuple { values: r.roots }
    }
}

fn check_same_degree(a: &UnorderedTuple, b: &UnorderedTuple) -> Result<usize> {
    if a.degree() != b.degree() {
        return Err(Error::DimensionMismatch {
            expected: a.degree(),
            found: b.degree(),
        });
    }
    Ok(a.degree())
}

/// `c_ij = |z_i - w_j|^2`.
pub fn squared_costs(z: &[Complex64], w: &[Complex64]) -> CostMatrix {
    CostMatrix::from_fn(z.len(), |i, j| (z[i] - w[j]).norm_sqr())
}

/// An optimal matching `i -> perm[i]` of `a` against `b` and the metric value.
pub fn optimal_matching(a: &UnorderedTuple, b: &UnorderedTuple) -> Result<(Vec<usize>, f64)> {
    let d = check_same_degree(a, b)?;
    let cost = squared_costs(&a.values, &b.values);
    let perm = hungarian(&cost);
    let value = (cost.cost_of(&perm) / d as f64).sqrt();
    Ok((perm, value))
}

/// The metric on unordered tuples.
pub fn dist(a: &UnorderedTuple, b: &UnorderedTuple) -> Result<f64> {
    optimal_matching(a, b).map(|(_, v)| v)
}

/// `(1/sqrt d) ||z - sigma w||_2` for the ordering `(sigma w)_i = w_{perm[i]}`.
pub fn ordered_distance(z: &[Complex64], w: &[Complex64], perm: &[usize]) -> f64 {
    let mut terms: Vec<f64> = perm
        .iter()
        .enumerate()
        .map(|(i, &j)| (z[i] - w[j]).norm_sqr())
        .collect();
    terms.sort_by(f64::total_cmp);
    (terms.iter().sum::<f64>() / z.len() as f64).sqrt()
}

/// Default slack for [`minimizing_permutations`]: `1e-9 (1 + dist)`.
pub fn default_slack(dist: f64) -> f64 {
    1e-9 * (1.0 + dist)
}

/// Every permutation `sigma` with `(1/sqrt d)||z - sigma w|| <= dist + slack`,
/// in lexicographic order of `perm`.
///
/// Depth-first branch and bound over rows; for `d <= 8` this amounts to a
/// pruned enumeration of `S_d`.
pub fn minimizing_permutations(
    a: &UnorderedTuple,
    b: &UnorderedTuple,
    slack: f64,
) -> Result<Vec<Vec<usize>>> {
    let d = check_same_degree(a, b)?;
    let best = dist(a, b)?;
    let cost = squared_costs(&a.values, &b.values);
    let limit = best + slack.max(0.0);
    let sum_limit = d as f64 * limit * limit * (1.0 + 1e-12) + f64::MIN_POSITIVE;

    // suffix[r] = sum over rows >= r of the row minimum: an admissible bound.
    let mut suffix = vec![0.0; d + 1];
    for r in (0..d).rev() {
        let row_min = (0..d).map(|j| cost.get(r, j)).fold(f64::INFINITY, f64::min);
        suffix[r] = suffix[r + 1] + row_min;
    }

    struct Search<'a> {
        cost: &'a CostMatrix,
        suffix: &'a [f64],
        sum_limit: f64,
        limit: f64,
        z: &'a [Complex64],
        w: &'a [Complex64],
        used: Vec<bool>,
        perm: Vec<usize>,
        out: Vec<Vec<usize>>,
    }

    impl Search<'_> {
        fn run(&mut self, row: usize, partial: f64) {
            let d = self.used.len();
            if row == d {
                if ordered_distance(self.z, self.w, &self.perm) <= self.limit {
                    self.out.push(self.perm.clone());
                }
                return;
            }
            for j in 0..d {
                if self.used[j] {
                    continue;
                }
                let next = partial + self.cost.get(row, j);
                if next + self.suffix[row + 1] > self.sum_limit {
                    continue;
                }
                self.used[j] = true;
                self.perm.push(j);
                self.run(row + 1, next);
                self.perm.pop();
                self.used[j] = false;
            }
        }
    }

    let mut search = Search {
        cost: &cost,
        suffix: &suffix,
        sum_limit,
        limit,
        z: &a.values,
        w: &b.values,
        used: vec![false; d],
        perm: Vec::with_capacity(d),
        out: Vec::new(),
    };
    search.run(0, 0.0);
    Ok(search.out)
}

/// Parameters of the Almgren embedding: `h = 2d^2 + 1` directions
/// `theta_l = exp(2 pi i l / h)`, `l = 0..h`, target dimension `N = d h`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlmgrenConfig {
    d: usize,
    thetas: Vec<Complex64>,
}

impl AlmgrenConfig {
    pub fn new(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("degree must be at least 1"));
        }
        let h = 2 * d * d + 1;
        let thetas = (0..h)
            .map(|l| Complex64::from_polar(1.0, 2.0 * PI * l as f64 / h as f64))
            .collect();
        Ok(AlmgrenConfig { d, thetas })
    }

    pub fn degree(&self) -> usize {
        self.d
    }

    pub fn directions(&self) -> usize {
        self.thetas.len()
    }

    pub fn thetas(&self) -> &[Complex64] {
        &self.thetas
    }

    pub fn target_dim(&self) -> usize {
        self.d * self.thetas.len()
    }

    /// Lipschitz constant of each Almgren map, `sqrt(2 d^2 + 1)`.
    pub fn lipschitz_bound(&self) -> f64 {
        (self.thetas.len() as f64).sqrt()
    }
}

/// `Re(theta z_i)` sorted non-decreasingly.
pub fn almgren_map(t: &UnorderedTuple, theta: Complex64) -> Vec<f64> {
    let proj: Vec<f64> = t.values.iter().map(|&z| (theta * z).re).collect();
    sort_increasing(&proj)
}

/// `h^{-1/2}` times the concatenated Almgren maps over all directions.
pub fn almgren_embed(t: &UnorderedTuple, cfg: &AlmgrenConfig) -> Result<Vec<f64>> {
    if t.degree() != cfg.d {
        return Err(Error::DimensionMismatch {
            expected: cfg.d,
            found: t.degree(),
        });
    }
    let scale = (cfg.thetas.len() as f64).sqrt().recip();
    let mut out = Vec::with_capacity(cfg.target_dim());
    for &theta in &cfg.thetas {
        out.extend(almgren_map(t, theta).into_iter().map(|x| x * scale));
    }
    Ok(out)
}

/// Largest `alpha` such that some direction satisfies
/// `|Re(theta_l z_k)| >= alpha |z_k|` for every nonzero `z_k`.
pub fn combinatorial_alpha(zs: &[Complex64], cfg: &AlmgrenConfig) -> f64 {
    cfg.thetas
        .iter()
        .map(|&theta| {
            zs.iter()
                .filter(|z| z.norm() > 0.0)
                .map(|&z| (theta * z).re.abs() / z.norm())
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// 2-Wasserstein distance between `(1/d) sum delta_{z_i}` and
/// `(1/d) sum delta_{w_j}`, solved as a transport problem.
pub fn wasserstein2(a: &UnorderedTuple, b: &UnorderedTuple) -> Result<f64> {
    let d = check_same_degree(a, b)?;
    let cost = squared_costs(&a.values, &b.values);
    // Unit masses keep the simplex arithmetic exact; rescale by 1/d after.
    let ones = vec![1.0; d];
    let plan = transport::solve(&cost, &ones, &ones)?;
    Ok((plan.cost / d as f64).sqrt())
}

/// Coefficients `a_j = (-1)^j e_j(z)` of the monic polynomial with roots `[z]`.
pub fn coeffs_of(t: &UnorderedTuple) -> Vec<Complex64> {
    polycore::from_roots(&t.values)
        .expect("finite tuple gives finite coefficients")
        .coeffs()
        .to_vec()
}

/// The unordered tuple of roots of `p`.
pub fn roots_of(p: &MonicPolynomial, tol: f64) -> Result<UnorderedTuple> {
    p.roots(tol).map(UnorderedTuple::from)
}

/// Non-decreasing rearrangement of a real tuple.
pub fn sort_increasing(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Distance between the rotation orbits `[lambda]_theta` and `[mu]_theta`
/// of the `d`-th roots of unity: `min_j |lambda - theta^j mu|`.
pub fn dist_rad(lambda: Complex64, mu: Complex64, d: usize) -> f64 {
    rotation_distances(lambda, mu, d)
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

/// `|lambda - theta^j mu|` for `j = 0..d`.
pub fn rotation_distances(lambda: Complex64, mu: Complex64, d: usize) -> Vec<f64> {
    (0..d.max(1))
        .map(|j| (lambda - unit_root(d, j) * mu).norm())
        .collect()
}

/// `exp(2 pi i j / d)`, exact for the quarter turns.
pub fn unit_root(d: usize, j: usize) -> Complex64 {
    let d = d.max(1);
    let j = j % d;
    if (4 * j) % d == 0 {
        match 4 * j / d {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    } else {
        Complex64::from_polar(1.0, 2.0 * PI * j as f64 / d as f64)
    }
}

/// The orbit `[lambda, theta lambda, ..., theta^{d-1} lambda]`.
pub fn radical_orbit(lambda: Complex64, d: usize) -> UnorderedTuple {
    UnorderedTuple {
        values: (0..d).map(|j| unit_root(d, j) * lambda).collect(),
    }
}
