//! Stationary Markov measures on a chain graph and the Markovian-coupling
//! upper bound for ρ̄ between them.

use serde::{Deserialize, Serialize};

use super::lp::LinearProgram;
use super::{w1_distance, CouplingPlan, CouplingResult, CouplingStatus, FiniteMeasure, PeriodicOrbitMeasure};
use crate::chain::{strongly_connected_components, ChainGraph};
use crate::error::{Error, Result};
use crate::system::DistanceMatrix;

const STOCH_TOL: f64 = 1e-9;

/// Stationary Markov chain whose states are labelled by points.
///
/// Several states may carry the same label, which is how periodic orbits
/// visiting a point more than once are encoded as deterministic chains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkovMeasure {
    labels: Vec<usize>,
    kernel: Vec<Vec<f64>>,
    stationary: Vec<f64>,
}

impl MarkovMeasure {
    /// Requires a row-stochastic, irreducible kernel.
    pub fn new(labels: Vec<usize>, kernel: Vec<Vec<f64>>) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::invalid("Markov measure needs at least one state"));
        }
        if kernel.len() != n || kernel.iter().any(|r| r.len() != n) {
            return Err(Error::invalid(format!("kernel must be {n}×{n}")));
        }
        for (i, row) in kernel.iter().enumerate() {
            if row.iter().any(|&p| !p.is_finite() || p < 0.0) {
                return Err(Error::invalid(format!("kernel row {i} has a negative or non-finite entry")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > STOCH_TOL {
                return Err(Error::invalid(format!("kernel row {i} sums to {s}")));
            }
        }
        let out: Vec<Vec<usize>> =
            kernel.iter().map(|r| (0..n).filter(|&j| r[j] > 0.0).collect()).collect();
        if strongly_connected_components(&out).0 != 1 {
            return Err(Error::invalid("Markov kernel is not irreducible"));
        }
        let stationary = stationary_vector(&kernel)?;
        Ok(MarkovMeasure { labels, kernel, stationary })
    }

    /// Deterministic cycle through the positions of the word.
    pub fn from_periodic(pm: &PeriodicOrbitMeasure) -> Self {
        let p = pm.period();
        let kernel = (0..p)
            .map(|i| {
                let mut row = vec![0.0; p];
                row[(i + 1) % p] = 1.0;
                row
            })
            .collect();
        MarkovMeasure { labels: pm.word().to_vec(), kernel, stationary: vec![1.0 / p as f64; p] }
    }

    pub fn states(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn kernel(&self) -> &[Vec<f64>] {
        &self.kernel
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    /// Distribution of the point at a single coordinate.
    pub fn marginal(&self, n: usize) -> FiniteMeasure {
        let mut w = vec![0.0; n];
        for (s, &u) in self.labels.iter().enumerate() {
            w[u] += self.stationary[s];
        }
        FiniteMeasure::new(w).expect("stationary vector is a probability vector")
    }

    /// Whether every transition of positive probability is a chain-graph edge.
    pub fn is_supported_on(&self, g: &ChainGraph<'_>) -> bool {
        let n = self.states();
        (0..n).all(|i| {
            (0..n).all(|j| {
                self.kernel[i][j] == 0.0
                    || (self.labels[i] < g.len()
                        && self.labels[j] < g.len()
                        && g.has_edge(self.labels[i], self.labels[j]))
            })
        })
    }
}

/// Solves `s P = s`, `Σ s = 1` by Gaussian elimination with partial pivoting.
fn stationary_vector(p: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = p.len();
    // Rows of (Pᵀ − I) with the last equation replaced by normalisation.
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n).map(|j| p[j][i] - if i == j { 1.0 } else { 0.0 }).collect();
            row.push(0.0);
            row
        })
        .collect();
    a[n - 1] = vec![1.0; n + 1];
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .expect("non-empty range");
        if a[piv][col].abs() < 1e-14 {
            return Err(Error::invalid("stationary system is singular"));
        }
        a.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..=n {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
    }
    let s: Vec<f64> = (0..n).map(|i| (a[i][n] / a[i][i]).max(0.0)).collect();
    let total: f64 = s.iter().sum();
    Ok(s.into_iter().map(|x| x / total).collect())
}

/// Upper bound on ρ̄(μ, ν) from the best stationary Markovian coupling.
///
/// Variables are the pair distribution `λ(s, t)` and the flows
/// `F((s,t) → (s',t'))` on pair edges. Each pair's outgoing flow couples the
/// two kernel rows scaled by `λ(s, t)`, incoming flow equals `λ`, and the
/// pair marginals are the two stationary vectors. Markovian couplings are a
/// subset of all joinings, so the optimum bounds ρ̄ from above; `lower_bound`
/// is W1 of the one-coordinate marginals.
pub fn rho_bar_markov_upper(mu: &MarkovMeasure, nu: &MarkovMeasure, cost: &DistanceMatrix) -> Result<CouplingResult> {
    let n = cost.len();
    if mu.labels.iter().chain(&nu.labels).any(|&u| u >= n) {
        return Err(Error::invalid("measure label outside the cost matrix"));
    }
    let (a, b) = (mu.states(), nu.states());
    let pair = |s: usize, t: usize| s * b + t;
    let n_pairs = a * b;
    let mut edges = Vec::new();
    for s in 0..a {
        for t in 0..b {
            for s2 in (0..a).filter(|&s2| mu.kernel[s][s2] > 0.0) {
                for t2 in (0..b).filter(|&t2| nu.kernel[t][t2] > 0.0) {
                    edges.push((pair(s, t), pair(s2, t2)));
                }
            }
        }
    }
    let var_edge = |e: usize| n_pairs + e;
    let mut lp = LinearProgram::new(n_pairs + edges.len());
    let mut outgoing: Vec<Vec<usize>> = vec![Vec::new(); n_pairs];
    let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); n_pairs];
    for (e, &(from, to)) in edges.iter().enumerate() {
        outgoing[from].push(e);
        incoming[to].push(e);
    }
    for s in 0..a {
        for t in 0..b {
            let x = pair(s, t);
            for s2 in (0..a).filter(|&s2| mu.kernel[s][s2] > 0.0) {
                let mut terms: Vec<(usize, f64)> = outgoing[x]
                    .iter()
                    .filter(|&&e| edges[e].1 / b == s2)
                    .map(|&e| (var_edge(e), 1.0))
                    .collect();
                terms.push((x, -mu.kernel[s][s2]));
                lp.add_eq(terms, 0.0);
            }
            for t2 in (0..b).filter(|&t2| nu.kernel[t][t2] > 0.0) {
                let mut terms: Vec<(usize, f64)> = outgoing[x]
                    .iter()
                    .filter(|&&e| edges[e].1 % b == t2)
                    .map(|&e| (var_edge(e), 1.0))
                    .collect();
                terms.push((x, -nu.kernel[t][t2]));
                lp.add_eq(terms, 0.0);
            }
            let mut terms: Vec<(usize, f64)> = incoming[x].iter().map(|&e| (var_edge(e), 1.0)).collect();
            terms.push((x, -1.0));
            lp.add_eq(terms, 0.0);
        }
    }
    for s in 0..a {
        lp.add_eq((0..b).map(|t| (pair(s, t), 1.0)).collect(), mu.stationary[s]);
    }
    for t in 0..b {
        lp.add_eq((0..a).map(|s| (pair(s, t), 1.0)).collect(), nu.stationary[t]);
    }
    let mut c = vec![0.0; n_pairs + edges.len()];
    for s in 0..a {
        for t in 0..b {
            c[pair(s, t)] = cost.get(mu.labels[s], nu.labels[t]);
        }
    }
    lp.set_cost(c);
    let sol = lp.solve()?;

    let pairs = (0..n_pairs)
        .filter(|&x| sol.x[x] > 0.0)
        .map(|x| ((x / b, x % b), sol.x[x]))
        .collect();
    let flows = edges
        .iter()
        .enumerate()
        .filter(|&(e, _)| sol.x[var_edge(e)] > 0.0)
        .map(|(e, &(from, to))| ((from / b, from % b), (to / b, to % b), sol.x[var_edge(e)]))
        .collect();
    let lower = w1_distance(&mu.marginal(n), &nu.marginal(n), cost)?.value;
    Ok(CouplingResult {
        value: sol.objective,
        lower_bound: Some(lower),
        plan: CouplingPlan::Joint { pairs, flows },
        status: CouplingStatus::Optimal,
    })
}
