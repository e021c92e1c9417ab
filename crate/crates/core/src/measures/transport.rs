//! Transportation simplex: network simplex specialised to the complete
//! bipartite graph between supply and demand nodes.
//!
//! The basis is a spanning tree of `rows + cols − 1` cells (degenerate zero
//! flows included). Each iteration computes node potentials on the tree,
//! prices every non-basic cell, and pivots the most negative one in around
//! its unique tree cycle.

use crate::error::{Error, Result};

const EPS: f64 = 1e-12;
const MASS_TOL: f64 = 1e-9;

/// Optimal flow between two finite distributions.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportSolution {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `rows × cols` flow.
    pub flow: Vec<f64>,
    pub cost: f64,
    pub iterations: usize,
}

impl TransportSolution {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.flow[i * self.cols + j]
    }
}

pub(crate) fn iteration_cap(rows: usize, cols: usize) -> usize {
    50 * (rows + cols) * (rows + cols) + 1000
}

/// Solves `min Σ f_ij c(i, j)` over flows with row sums `supply` and column
/// sums `demand`.
pub fn solve_transport(
    supply: &[f64],
    demand: &[f64],
    cost: impl Fn(usize, usize) -> f64,
) -> Result<TransportSolution> {
    let total_s: f64 = supply.iter().sum();
    let total_d: f64 = demand.iter().sum();
    if supply.iter().chain(demand).any(|&w| !(w >= 0.0) || !w.is_finite()) {
        return Err(Error::invalid("transport masses must be finite and nonnegative"));
    }
    if (total_s - total_d).abs() > MASS_TOL * total_s.max(1.0) {
        return Err(Error::Infeasible);
    }
    let (rows, cols) = (supply.len(), demand.len());
    // Only nodes carrying mass take part; the rest get zero flow.
    let ri: Vec<usize> = (0..rows).filter(|&i| supply[i] > 0.0).collect();
    let cj: Vec<usize> = (0..cols).filter(|&j| demand[j] > 0.0).collect();
    let mut flow = vec![0.0; rows * cols];
    if ri.is_empty() || cj.is_empty() {
        return Ok(TransportSolution { rows, cols, flow, cost: 0.0, iterations: 0 });
    }
    let s: Vec<f64> = ri.iter().map(|&i| supply[i]).collect();
    let mut d: Vec<f64> = cj.iter().map(|&j| demand[j]).collect();
    // absorb rounding imbalance into the largest demand
    let big = (0..d.len()).max_by(|&a, &b| d[a].total_cmp(&d[b])).unwrap();
    d[big] += total_s - total_d;
    let c: Vec<f64> = ri
        .iter()
        .flat_map(|&i| cj.iter().map(move |&j| (i, j)))
        .map(|(i, j)| cost(i, j))
        .collect();
    let (sub, iterations) = network_simplex(&s, &d, &c)?;
    let m = cj.len();
    let mut total = 0.0;
    for (a, &i) in ri.iter().enumerate() {
        for (b, &j) in cj.iter().enumerate() {
            let f = sub[a * m + b];
            flow[i * cols + j] = f;
            total += f * c[a * m + b];
        }
    }
    Ok(TransportSolution { rows, cols, flow, cost: total, iterations })
}

struct Basis {
    rows: usize,
    cols: usize,
    cells: Vec<(usize, usize)>,
    flow: Vec<f64>,
}

impl Basis {
    /// North-west corner start: a spanning tree with exactly `rows + cols − 1` cells.
    fn northwest(s: &[f64], d: &[f64]) -> Self {
        let (rows, cols) = (s.len(), d.len());
        let (mut s, mut d) = (s.to_vec(), d.to_vec());
        let mut cells = Vec::with_capacity(rows + cols - 1);
        let mut flow = Vec::with_capacity(rows + cols - 1);
        let (mut i, mut j) = (0, 0);
        loop {
            let x = s[i].min(d[j]);
            cells.push((i, j));
            flow.push(x);
            s[i] -= x;
            d[j] -= x;
            if i == rows - 1 && j == cols - 1 {
                break;
            }
            if i == rows - 1 {
                j += 1;
            } else if j == cols - 1 {
                i += 1;
            } else if s[i] <= d[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
        debug_assert_eq!(cells.len(), rows + cols - 1);
        Basis { rows, cols, cells, flow }
    }

    /// Adjacency over tree nodes: rows are `0..rows`, columns `rows..rows+cols`.
    fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.rows + self.cols];
        for (k, &(i, j)) in self.cells.iter().enumerate() {
            adj[i].push((self.rows + j, k));
            adj[self.rows + j].push((i, k));
        }
        adj
    }

    fn potentials(&self, adj: &[Vec<(usize, usize)>], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.rows + self.cols;
        let mut pot = vec![f64::NAN; n];
        pot[0] = 0.0;
        let mut stack = vec![0];
        while let Some(x) = stack.pop() {
            for &(y, k) in &adj[x] {
                if pot[y].is_nan() {
                    let (i, j) = self.cells[k];
                    let cij = c[i * self.cols + j];
                    // u_i + v_j = c_ij
                    pot[y] = cij - pot[x];
                    stack.push(y);
                }
            }
        }
        (pot[..self.rows].to_vec(), pot[self.rows..].to_vec())
    }

    /// Tree path from row node `i` to column node `rows + j`, as cell indices.
    fn path(&self, adj: &[Vec<(usize, usize)>], i: usize, j: usize) -> Vec<usize> {
        let n = self.rows + self.cols;
        let target = self.rows + j;
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
        let mut seen = vec![false; n];
        seen[i] = true;
        let mut stack = vec![i];
        while let Some(x) = stack.pop() {
            if x == target {
                break;
            }
            for &(y, k) in &adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    parent[y] = Some((x, k));
                    stack.push(y);
                }
            }
        }
        let mut cells = Vec::new();
        let mut x = target;
        while x != i {
            let (p, k) = parent[x].expect("basis is a spanning tree");
            cells.push(k);
            x = p;
        }
        cells.reverse();
        cells
    }
}

fn network_simplex(s: &[f64], d: &[f64], c: &[f64]) -> Result<(Vec<f64>, usize)> {
    let (rows, cols) = (s.len(), d.len());
    let mut basis = Basis::northwest(s, d);
    let mut in_basis = vec![false; rows * cols];
    for &(i, j) in &basis.cells {
        in_basis[i * cols + j] = true;
    }
    let cap = iteration_cap(rows, cols);
    let mut degenerate_streak = 0usize;
    let mut iterations = 0;
    loop {
        let adj = basis.adjacency();
        let (u, v) = basis.potentials(&adj, c);
        // Dantzig pricing; Bland's first-index rule after a long degenerate run.
        let bland = degenerate_streak > rows + cols;
        let mut entering: Option<(usize, usize, f64)> = None;
        'price: for i in 0..rows {
            for j in 0..cols {
                if in_basis[i * cols + j] {
                    continue;
                }
                let rc = c[i * cols + j] - u[i] - v[j];
                if rc < -EPS * (1.0 + c[i * cols + j].abs()) {
                    if entering.is_none_or(|(_, _, best)| rc < best) {
                        entering = Some((i, j, rc));
                        if bland {
                            break 'price;
                        }
                    }
                }
            }
        }
        let Some((ei, ej, _)) = entering else { break };
        iterations += 1;
        if iterations > cap {
            return Err(Error::SolverIterationCap(cap));
        }
        // Cycle: entering cell (+), then tree path from column ej back to row
        // ei with alternating signs starting at −.
        let mut path = basis.path(&adj, ei, ej);
        path.reverse();
        let minus: Vec<usize> = path.iter().copied().step_by(2).collect();
        let (leave, theta) = minus
            .iter()
            .map(|&k| (k, basis.flow[k]))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .expect("cycle has a backward cell");
        for (pos, &k) in path.iter().enumerate() {
            if pos % 2 == 0 {
                basis.flow[k] -= theta;
            } else {
                basis.flow[k] += theta;
            }
        }
        degenerate_streak = if theta <= EPS { degenerate_streak + 1 } else { 0 };
        let (li, lj) = basis.cells[leave];
        in_basis[li * cols + lj] = false;
        in_basis[ei * cols + ej] = true;
        basis.cells[leave] = (ei, ej);
        basis.flow[leave] = theta;
    }
    let mut flow = vec![0.0; rows * cols];
    for (k, &(i, j)) in basis.cells.iter().enumerate() {
        flow[i * cols + j] = basis.flow[k].max(0.0);
    }
    Ok((flow, iterations))
}
