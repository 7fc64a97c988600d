//! Exact transportation simplex on a dense bipartite problem.
//!
//! Classical primal simplex specialized to the transportation polytope:
//! the basis is a spanning tree of the bipartite supply/demand graph,
//! potentials come from solving `u_i + v_j = c_ij` along the tree, and
//! pivots push flow around the unique cycle closed by the entering cell.
//! Entering and leaving variables follow Bland's rule (lowest index), which
//! keeps the method deterministic and free of cycling on the degenerate
//! instances that equal-mass atoms produce.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct TransportSolution {
    /// Optimal flows, row-major `supply.len() x demand.len()`.
    pub flows: Vec<f64>,
    /// Row potentials `u` with `u[0] = 0`.
    pub row_potentials: Vec<f64>,
    /// Column potentials `v`, so that `u_i + v_j <= c_ij` at optimality.
    pub col_potentials: Vec<f64>,
    pub cost: f64,
    pub pivots: usize,
}

struct Basis {
    m: usize,
    n: usize,
    /// Basic cells (i, j); always m + n - 1 of them.
    cells: Vec<(usize, usize)>,
}

impl Basis {
    fn node_count(&self) -> usize {
        self.m + self.n
    }

    /// Tree adjacency over nodes `0..m` (rows) and `m..m+n` (columns).
    fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.node_count()];
        for (k, &(i, j)) in self.cells.iter().enumerate() {
            adj[i].push((self.m + j, k));
            adj[self.m + j].push((i, k));
        }
        adj
    }
}

pub fn solve_transportation(
    supply: &[f64],
    demand: &[f64],
    cost: &[f64],
) -> Result<TransportSolution> {
    let m = supply.len();
    let n = demand.len();
    assert_eq!(cost.len(), m * n, "cost matrix shape");
    if m == 0 || n == 0 {
        return Err(Error::Infeasible);
    }
    let total_supply: f64 = supply.iter().sum();
    let total_demand: f64 = demand.iter().sum();
    if (total_supply - total_demand).abs() > 1e-9 * (1.0 + total_supply.abs()) {
        return Err(Error::Infeasible);
    }
    let scale = cost.iter().fold(0.0f64, |acc, &c| acc.max(c.abs()));
    let eps = (1.0 + scale) * 1e-12;

    // Northwest-corner start: a staircase path, always a spanning tree.
    let mut flows = vec![0.0; m * n];
    let mut cells = Vec::with_capacity(m + n - 1);
    {
        let mut ra = supply[0];
        let mut rb = demand[0];
        let (mut i, mut j) = (0usize, 0usize);
        loop {
            let t = ra.min(rb).max(0.0);
            flows[i * n + j] = t;
            cells.push((i, j));
            ra -= t;
            rb -= t;
            if i == m - 1 && j == n - 1 {
                break;
            }
            if (ra <= rb && i < m - 1) || j == n - 1 {
                i += 1;
                ra = supply[i];
            } else {
                j += 1;
                rb = demand[j];
            }
        }
    }
    let mut basis = Basis { m, n, cells };

    let max_pivots = 1000 * (m + n).max(16);
    let mut pivots = 0;
    loop {
        let (u, v) = potentials(&basis, cost)?;

        // Bland: first cell in lexicographic order with negative reduced cost.
        let mut entering = None;
        'scan: for i in 0..m {
            for j in 0..n {
                let reduced = cost[i * n + j] - u[i] - v[j];
                if reduced < -eps {
                    entering = Some((i, j));
                    break 'scan;
                }
            }
        }
        let Some((ei, ej)) = entering else {
            let total_cost = flows
                .iter()
                .zip(cost.iter())
                .map(|(&f, &c)| f * c)
                .sum::<f64>();
            return Ok(TransportSolution {
                flows,
                row_potentials: u,
                col_potentials: v,
                cost: total_cost,
                pivots,
            });
        };

        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::Validation {
                path: "transportation simplex".into(),
                reason: format!("no convergence after {max_pivots} pivots"),
            });
        }

        // Unique tree path from row ei to column ej; cells along it
        // alternate -,+ after the entering cell's +.
        let path_cells = tree_path(&basis, ei, basis.m + ej);
        let mut minus_cells: Vec<(usize, usize)> = Vec::new();
        let mut plus_cells: Vec<(usize, usize)> = vec![(ei, ej)];
        for (step, &cell_idx) in path_cells.iter().enumerate() {
            let cell = basis.cells[cell_idx];
            if step % 2 == 0 {
                minus_cells.push(cell);
            } else {
                plus_cells.push(cell);
            }
        }

        let theta = minus_cells
            .iter()
            .map(|&(i, j)| flows[i * n + j])
            .fold(f64::INFINITY, f64::min)
            .max(0.0);
        // leaving cell: lowest index among the minus cells at the minimum
        let leaving = *minus_cells
            .iter()
            .filter(|&&(i, j)| flows[i * n + j] <= theta + eps)
            .min()
            .expect("cycle has a minus cell");

        for &(i, j) in &plus_cells {
            flows[i * n + j] += theta;
        }
        for &(i, j) in &minus_cells {
            flows[i * n + j] -= theta;
            flows[i * n + j] = flows[i * n + j].max(0.0);
        }
        flows[leaving.0 * n + leaving.1] = 0.0;

        let pos = basis
            .cells
            .iter()
            .position(|&c| c == leaving)
            .expect("leaving cell in basis");
        basis.cells[pos] = (ei, ej);
    }
}

/// Solve `u_i + v_j = c_ij` over the basis tree, rooted at row 0.
fn potentials(basis: &Basis, cost: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = basis.m;
    let n = basis.n;
    let adj = basis.adjacency();
    let mut u = vec![f64::NAN; m];
    let mut v = vec![f64::NAN; n];
    u[0] = 0.0;
    let mut stack = vec![0usize];
    let mut seen = vec![false; basis.node_count()];
    seen[0] = true;
    while let Some(node) = stack.pop() {
        for &(next, cell_idx) in &adj[node] {
            if seen[next] {
                continue;
            }
            seen[next] = true;
            let (i, j) = basis.cells[cell_idx];
            if next >= m {
                v[j] = cost[i * n + j] - u[i];
            } else {
                u[i] = cost[i * n + j] - v[j];
            }
            stack.push(next);
        }
    }
    if seen.iter().any(|&s| !s) {
        return Err(Error::Validation {
            path: "transportation simplex".into(),
            reason: "basis does not span the bipartite graph".into(),
        });
    }
    Ok((u, v))
}

/// Cell indices along the unique tree path between two nodes.
fn tree_path(basis: &Basis, from: usize, to: usize) -> Vec<usize> {
    let adj = basis.adjacency();
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; basis.node_count()];
    let mut seen = vec![false; basis.node_count()];
    seen[from] = true;
    let mut queue = std::collections::VecDeque::from([from]);
    while let Some(node) = queue.pop_front() {
        if node == to {
            break;
        }
        for &(next, cell_idx) in &adj[node] {
            if !seen[next] {
                seen[next] = true;
                parent[next] = Some((node, cell_idx));
                queue.push_back(next);
            }
        }
    }
    let mut cells = Vec::new();
    let mut node = to;
    while let Some((prev, cell_idx)) = parent[node] {
        cells.push(cell_idx);
        node = prev;
    }
    cells.reverse();
    cells
}
