//! Exact minimum-cost perfect matching on a dense square cost matrix.
//!
//! Shortest augmenting path Hungarian method with row/column potentials,
//! `O(n^3)`. Ties are resolved by scan order, so the result is deterministic.

/// Row-major square cost matrix.
#[derive(Debug, Clone)]
pub struct CostMatrix {
    n: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        CostMatrix { n, data }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Total cost of the matching `i -> perm[i]`. Terms are summed in
    /// ascending order so the value depends only on the multiset of matched
    /// costs.
    pub fn cost_of(&self, perm: &[usize]) -> f64 {
        let mut terms: Vec<f64> = perm.iter().enumerate().map(|(i, &j)| self.get(i, j)).collect();
        terms.sort_by(f64::total_cmp);
        terms.iter().sum()
    }
}

/// Optimal assignment `i -> perm[i]` minimizing `sum_i cost(i, perm[i])`.
pub fn hungarian(cost: &CostMatrix) -> Vec<usize> {
    let n = cost.size();
    if n == 0 {
        return Vec::new();
    }
    // 1-based arrays; column 0 is the virtual start.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let i0 = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = cost.get(i0 - 1, j - 1) - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = col0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    col1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            owner[col0] = owner[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }

    let mut perm = vec![0; n];
    for j in 1..=n {
        perm[owner[j] - 1] = j - 1;
    }
    perm
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force(cost: &CostMatrix) -> f64 {
        fn rec(cost: &CostMatrix, row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            let n = cost.size();
            if row == n {
                *best = best.min(acc);
                return;
            }
            for j in 0..n {
                if !used[j] {
                    used[j] = true;
                    rec(cost, row + 1, used, acc + cost.get(row, j), best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(cost, 0, &mut vec![false; cost.size()], 0.0, &mut best);
        best
    }

    #[test]
    fn small_hand_case() {
        let raw = [[4.0, 3.0, 5.0], [3.0, 5.0, 9.0], [4.0, 1.0, 4.0]];
        let cost = CostMatrix::from_fn(3, |i, j| raw[i][j]);
        let perm = hungarian(&cost);
        assert_eq!(perm, vec![2, 0, 1]);
        assert_eq!(cost.cost_of(&perm), 9.0);
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..300 {
            let n = rng.gen_range(1..=6);
            let cost = CostMatrix::from_fn(n, |_, _| rng.gen_range(0.0..10.0));
            let perm = hungarian(&cost);
            let mut seen = perm.clone();
            seen.sort();
            assert_eq!(seen, (0..n).collect::<Vec<_>>());
            assert!((cost.cost_of(&perm) - brute_force(&cost)).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_matrix() {
        assert!(hungarian(&CostMatrix::from_fn(0, |_, _| 0.0)).is_empty());
    }
}
