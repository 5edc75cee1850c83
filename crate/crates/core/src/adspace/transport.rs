//! Discrete optimal transport between finitely supported measures, solved
//! with the transportation simplex (MODI potentials, Bland's rule).
//!
//! This is deliberately a different algorithm from the Hungarian solver in
//! [`super::assignment`]; the two are used to cross-check each other.

use crate::error::{Error, Result};

use super::assignment::CostMatrix;

/// Optimal transport plan; `flow[i][j]` is the mass moved from source `i` to
/// target `j`.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    pub flow: Vec<Vec<f64>>,
    pub cost: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Cell {
    row: usize,
    col: usize,
}

/// Solve `min sum c_ij x_ij` subject to row sums `supply` and column sums
/// `demand`. Only square problems are needed here, but the routine is
/// general. Total supply must equal total demand.
pub fn solve(cost: &CostMatrix, supply: &[f64], demand: &[f64]) -> Result<TransportPlan> {
    let m = supply.len();
    let n = demand.len();
    if cost.size() != m || m != n {
        return Err(Error::DimensionMismatch {
            expected: cost.size(),
            found: m.max(n),
        });
    }
    if m == 0 {
        return Ok(TransportPlan {
            flow: Vec::new(),
            cost: 0.0,
        });
    }
    let total_s: f64 = supply.iter().sum();
    let total_d: f64 = demand.iter().sum();
    if (total_s - total_d).abs() > 1e-12 * total_s.abs().max(1.0) {
        return Err(Error::invalid("unbalanced transport problem"));
    }

    let mut flow = vec![vec![0.0; n]; m];
    let mut basis = northwest_corner(supply, demand, &mut flow);

    let scale = (0..m)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| cost.get(i, j).abs())
        .fold(0.0, f64::max);
    let eps = 1e-13 * (1.0 + scale);
    let max_pivots = 1000 * (m + n) * (m + n);

    for _ in 0..max_pivots {
        let (u, v) = potentials(cost, &basis, m, n);
        let entering = (0..m)
            .flat_map(|i| (0..n).map(move |j| Cell { row: i, col: j }))
            .find(|c| {
                !basis.contains(c) && cost.get(c.row, c.col) - u[c.row] - v[c.col] < -eps
            });
        let Some(entering) = entering else {
            let mut terms: Vec<f64> = (0..m)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .filter(|&(i, j)| flow[i][j] > 0.0)
                .map(|(i, j)| flow[i][j] * cost.get(i, j))
                .collect();
            terms.sort_by(f64::total_cmp);
            return Ok(TransportPlan {
                flow,
                cost: terms.iter().sum(),
            });
        };

        // Path in the basis tree from the entering column back to its row.
        let path = tree_path(&basis, m, n, entering);
        // Cells on the path alternate -, +, -, ... starting at the column end.
        let minus: Vec<usize> = path.iter().copied().step_by(2).collect();
        let theta = minus
            .iter()
            .map(|&k| flow[basis[k].row][basis[k].col])
            .fold(f64::INFINITY, f64::min);
        let leaving = *minus
            .iter()
            .filter(|&&k| flow[basis[k].row][basis[k].col] == theta)
            .min_by_key(|&&k| basis[k].row * n + basis[k].col)
            .expect("cycle has a decreasing cell");

        for (pos, &k) in path.iter().enumerate() {
            let c = basis[k];
            if pos % 2 == 0 {
                flow[c.row][c.col] -= theta;
            } else {
                flow[c.row][c.col] += theta;
            }
        }
        flow[entering.row][entering.col] += theta;
        let out = basis[leaving];
        flow[out.row][out.col] = 0.0;
        basis[leaving] = entering;
    }
    Err(Error::NonConvergence {
        iterations: max_pivots,
        residual: f64::NAN,
    })
}

fn northwest_corner(supply: &[f64], demand: &[f64], flow: &mut [Vec<f64>]) -> Vec<Cell> {
    let (m, n) = (supply.len(), demand.len());
    let mut s = supply.to_vec();
    let mut t = demand.to_vec();
    let (mut i, mut j) = (0, 0);
    let mut basis = Vec::with_capacity(m + n - 1);
    loop {
        let x = s[i].min(t[j]);
        flow[i][j] = x;
        s[i] -= x;
        t[j] -= x;
        basis.push(Cell { row: i, col: j });
        if i == m - 1 && j == n - 1 {
            break;
        }
        if (s[i] <= 0.0 && i < m - 1) || j == n - 1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    basis
}

/// Dual potentials with `u_0 = 0` and `u_i + v_j = c_ij` on basic cells.
fn potentials(cost: &CostMatrix, basis: &[Cell], m: usize, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut u = vec![f64::NAN; m];
    let mut v = vec![f64::NAN; n];
    u[0] = 0.0;
    let mut changed = true;
    while changed {
        changed = false;
        for c in basis {
            let c_ij = cost.get(c.row, c.col);
            if !u[c.row].is_nan() && v[c.col].is_nan() {
                v[c.col] = c_ij - u[c.row];
                changed = true;
            } else if u[c.row].is_nan() && !v[c.col].is_nan() {
                u[c.row] = c_ij - v[c.col];
                changed = true;
            }
        }
    }
    (u, v)
}

/// Basis indices along the unique tree path from column `entering.col` to
/// row `entering.row`. Nodes `0..m` are rows and `m..m+n` are columns.
fn tree_path(basis: &[Cell], m: usize, n: usize, entering: Cell) -> Vec<usize> {
    let nodes = m + n;
    let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nodes];
    for (k, c) in basis.iter().enumerate() {
        adjacency[c.row].push((m + c.col, k));
        adjacency[m + c.col].push((c.row, k));
    }
    let start = m + entering.col;
    let goal = entering.row;
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; nodes];
    let mut visited = vec![false; nodes];
    let mut stack = vec![start];
    visited[start] = true;
    while let Some(node) = stack.pop() {
        if node == goal {
            break;
        }
        for &(next, k) in &adjacency[node] {
            if !visited[next] {
                visited[next] = true;
                parent[next] = Some((node, k));
                stack.push(next);
            }
        }
    }
    let mut path = Vec::new();
    let mut node = goal;
    while node != start {
        let (prev, k) = parent[node].expect("basis is a spanning tree");
        path.push(k);
        node = prev;
    }
    path.reverse();
    path
}
