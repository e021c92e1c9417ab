//! δ-chain graphs and their mixing certificates.
//!
//! The chain graph at threshold δ has an edge `u → v` iff `ρ(T(u), v) ≤ δ`.
//! Its biinfinite walks are exactly the δ-chains, so the graph is a finite
//! presentation of the chain subshift `X_T^δ`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::*;
use crate::system::{FiniteMetricSystem, FiniteTrajectory};
use crate::{le_tol, TOL};

/// Row-major boolean matrix packed into 64-bit words.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct BitMatrix {
    n: usize,
    words: usize,
    bits: Vec<u64>,
}

impl BitMatrix {
    pub(crate) fn new(n: usize) -> Self {
        let words = n.div_ceil(64).max(1);
        BitMatrix { n, words, bits: vec![0; n * words] }
    }

    pub(crate) fn identity(n: usize) -> Self {
        let mut m = Self::new(n);
        for i in 0..n {
            m.set(i, i);
        }
        m
    }

    #[inline]
    pub(crate) fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    #[inline]
    pub(crate) fn set(&mut self, i: usize, j: usize) {
        self.bits[i * self.words + j / 64] |= 1 << (j % 64);
    }

    fn row(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words..(i + 1) * self.words]
    }

    fn full_row_mask(&self, w: usize) -> u64 {
        let rem = self.n - 64 * w;
        if rem >= 64 {
            u64::MAX
        } else {
            (1u64 << rem) - 1
        }
    }

    pub(crate) fn is_all_true(&self) -> bool {
        (0..self.n).all(|i| {
            self.row(i)
                .iter()
                .enumerate()
                .all(|(w, &bits)| bits & self.full_row_mask(w) == self.full_row_mask(w))
        })
    }

    pub(crate) fn first_false(&self) -> Option<(usize, usize)> {
        (0..self.n)
            .flat_map(|i| (0..self.n).map(move |j| (i, j)))
            .find(|&(i, j)| !self.get(i, j))
    }

    /// Boolean product `self · rhs`.
    pub(crate) fn mul(&self, rhs: &BitMatrix) -> BitMatrix {
        let words = self.words;
        let rows: Vec<Vec<u64>> = (0..self.n)
            .into_par_iter()
            .map(|i| {
                let mut acc = vec![0u64; words];
                for j in 0..self.n {
                    if self.get(i, j) {
                        for (a, b) in acc.iter_mut().zip(rhs.row(j)) {
                            *a |= *b;
                        }
                    }
                }
                acc
            })
            .collect();
        BitMatrix { n: self.n, words, bits: rows.concat() }
    }

    fn is_subset_of(&self, other: &BitMatrix) -> bool {
        self.bits.iter().zip(&other.bits).all(|(a, b)| a & !b == 0)
    }
}

/// Directed graph of δ-chain steps on the points of a system.
#[derive(Clone, Debug)]
pub struct ChainGraph<'s> {
    system: &'s FiniteMetricSystem,
    delta: f64,
    adj: BitMatrix,
    out: Vec<Vec<usize>>,
}

pub fn build_chain_graph(sys: &FiniteMetricSystem, delta: f64) -> Result<ChainGraph<'_>> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::invalid(format!("delta must lie in [0, 1], got {delta}")));
    }
    let n = sys.len();
    let mut adj = BitMatrix::new(n);
    let mut out = vec![Vec::new(); n];
    for (u, nbrs) in out.iter_mut().enumerate() {
        let tu = sys.image(u);
        for v in 0..n {
            if le_tol(sys.dist(tu, v), delta) {
                adj.set(u, v);
                nbrs.push(v);
            }
        }
    }
    Ok(ChainGraph { system: sys, delta, adj, out })
}

impl<'s> ChainGraph<'s> {
    pub fn system(&self) -> &'s FiniteMetricSystem {
        self.system
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn len(&self) -> usize {
        self.out.len()
    }

    pub fn is_empty(&self) -> bool {
        self.out.is_empty()
    }

    #[inline]
    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj.get(u, v)
    }

    /// Out-neighbours of `u` in increasing id order.
    pub fn out_neighbors(&self, u: usize) -> &[usize] {
        &self.out[u]
    }

    pub fn edge_count(&self) -> usize {
        self.out.iter().map(Vec::len).sum()
    }

    pub fn is_complete(&self) -> bool {
        self.adj.is_all_true()
    }

    /// Whether every edge of `self` is an edge of `other`.
    pub fn is_subgraph_of(&self, other: &ChainGraph<'_>) -> bool {
        self.len() == other.len() && self.adj.is_subset_of(&other.adj)
    }

    /// One line per vertex: `u: v1 v2 …`.
    pub fn to_adjacency_list(&self) -> String {
        let mut s = String::new();
        for (u, nbrs) in self.out.iter().enumerate() {
            let _ = write!(s, "{u}:");
            for v in nbrs {
                let _ = write!(s, " {v}");
            }
            s.push('\n');
        }
        s
    }

    pub fn to_dot(&self) -> String {
        let mut s = format!("digraph chain {{\n  label=\"delta = {}\";\n", self.delta);
        for u in 0..self.len() {
            let _ = writeln!(s, "  {u} [label=\"{}\"];", self.system.label(u).replace('"', "\\\""));
        }
        for (u, nbrs) in self.out.iter().enumerate() {
            for v in nbrs {
                let _ = writeln!(s, "  {u} -> {v};");
            }
        }
        s.push_str("}\n");
        s
    }
}

/// Strong connectivity, period and (when primitive) the mixing constant `M`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixingCertificate {
    pub strongly_connected: bool,
    pub components: usize,
    /// gcd of all cycle lengths.
    pub period: usize,
    /// Least `M` such that chains of every length `m ≥ M` join every pair.
    pub mixing_constant: Option<usize>,
    /// A pair with no chain of length `M − 1`, when one exists.
    pub minimality_witness: Option<(usize, usize)>,
}

impl MixingCertificate {
    pub fn is_mixing(&self) -> bool {
        self.mixing_constant.is_some()
    }

    pub fn require_mixing(&self) -> Result<usize> {
        self.mixing_constant.ok_or(Error::NotMixing {
            strongly_connected: self.strongly_connected,
            period: self.period,
        })
    }
}

/// Wielandt's bound `(n−1)² + 1` on the exponent of a primitive matrix.
pub fn wielandt_bound(n: usize) -> usize {
    (n.saturating_sub(1)).pow(2) + 1
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Kosaraju, iterative. Returns the component index of every vertex.
pub(crate) fn strongly_connected_components(out: &[Vec<usize>]) -> (usize, Vec<usize>) {
    let n = out.len();
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for s in 0..n {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut stack = vec![(s, 0usize)];
        while let Some(&mut (u, ref mut next)) = stack.last_mut() {
            if let Some(&v) = out[u].get(*next) {
                *next += 1;
                if !seen[v] {
                    seen[v] = true;
                    stack.push((v, 0));
                }
            } else {
                order.push(u);
                stack.pop();
            }
        }
    }
    let mut rev = vec![Vec::new(); n];
    for (u, nbrs) in out.iter().enumerate() {
        for &v in nbrs {
            rev[v].push(u);
        }
    }
    let mut comp = vec![usize::MAX; n];
    let mut count = 0;
    for &s in order.iter().rev() {
        if comp[s] != usize::MAX {
            continue;
        }
        comp[s] = count;
        let mut stack = vec![s];
        while let Some(u) = stack.pop() {
            for &v in &rev[u] {
                if comp[v] == usize::MAX {
                    comp[v] = count;
                    stack.push(v);
                }
            }
        }
        count += 1;
    }
    (count, comp)
}

/// gcd of cycle lengths, from BFS levels inside each component.
fn cycle_gcd(out: &[Vec<usize>], comp: &[usize], count: usize) -> usize {
    let n = out.len();
    let mut level = vec![usize::MAX; n];
    let mut g = 0;
    for c in 0..count {
        let Some(root) = (0..n).find(|&u| comp[u] == c) else { continue };
        level[root] = 0;
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &v in &out[u] {
                if comp[v] == c && level[v] == usize::MAX {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        for u in (0..n).filter(|&u| comp[u] == c) {
            for &v in out[u].iter().filter(|&&v| comp[v] == c) {
                g = gcd(g, (level[u] + 1).abs_diff(level[v]));
            }
        }
    }
    g.max(1)
}

pub fn mixing_certificate(g: &ChainGraph<'_>) -> MixingCertificate {
    let n = g.len();
    let (components, comp) = strongly_connected_components(&g.out);
    let strongly_connected = components == 1;
    let period = cycle_gcd(&g.out, &comp, components);
    let mut cert = MixingCertificate {
        strongly_connected,
        components,
        period,
        mixing_constant: None,
        minimality_witness: None,
    };
    if !strongly_connected || period != 1 {
        return cert;
    }
    // Every vertex has an out-edge (to T(u)), so once a power is all-true
    // every higher power is as well.
    let mut prev = BitMatrix::identity(n);
    let mut power = g.adj.clone();
    let mut m = 1;
    while !power.is_all_true() {
        if m > wielandt_bound(n) {
            unreachable!("primitive graph exceeded the Wielandt bound");
        }
        prev = power;
        power = prev.mul(&g.adj);
        m += 1;
    }
    cert.mixing_constant = Some(m);
    cert.minimality_witness = prev.first_false();
    cert
}

/// Lexicographically least walk of exactly `length` steps from `x` to `y`.
pub fn finite_chain(g: &ChainGraph<'_>, x: usize, y: usize, length: usize) -> Result<Vec<usize>> {
    let n = g.len();
    if x >= n || y >= n {
        return Err(Error::invalid(format!("vertex out of range: {x} -> {y}")));
    }
    // reach[r][u]: a walk of exactly r steps leads from u to y.
    let mut reach: Vec<Vec<bool>> = Vec::with_capacity(length + 1);
    let mut base = vec![false; n];
    base[y] = true;
    reach.push(base);
    for r in 1..=length {
        let prev = &reach[r - 1];
        let layer: Vec<bool> = (0..n).map(|u| g.out[u].iter().any(|&v| prev[v])).collect();
        reach.push(layer);
    }
    if !reach[length][x] {
        return Err(Error::NoChain { from: x, to: y, length });
    }
    let mut walk = Vec::with_capacity(length + 1);
    walk.push(x);
    let mut u = x;
    for r in (0..length).rev() {
        u = *g.out[u].iter().find(|&&v| reach[r][v]).expect("layered reachability");
        walk.push(u);
    }
    Ok(walk)
}

/// Chain graphs for `δ = 1, 1/2, …, 1/n_max` and the thresholds at which the
/// graph can change.
#[derive(Clone, Debug)]
pub struct ChainFamily<'s> {
    pub graphs: Vec<ChainGraph<'s>>,
    /// Distinct values of `ρ(T(u), v)`, increasing.
    pub critical_deltas: Vec<f64>,
}

pub fn chain_family(sys: &FiniteMetricSystem, n_max: usize) -> Result<ChainFamily<'_>> {
    if n_max == 0 {
        return Err(Error::invalid("n_max must be at least 1"));
    }
    let graphs = (1..=n_max)
        .into_par_iter()
        .map(|k| build_chain_graph(sys, 1.0 / k as f64))
        .collect::<Result<Vec<_>>>()?;
    Ok(ChainFamily { graphs, critical_deltas: critical_deltas(sys) })
}

pub fn critical_deltas(sys: &FiniteMetricSystem) -> Vec<f64> {
    let mut vals: Vec<f64> = (0..sys.len())
        .flat_map(|u| {
            let tu = sys.image(u);
            (0..sys.len()).map(move |v| sys.dist(tu, v))
        })
        .collect();
    vals.sort_by(f64::total_cmp);
    vals.dedup_by(|a, b| (*a - *b).abs() <= TOL);
    vals
}

pub fn is_delta_chain(traj: &FiniteTrajectory, g: &ChainGraph<'_>) -> bool {
    let e = traj.entries();
    e.iter().all(|&u| u < g.len()) && e.windows(2).all(|w| g.has_edge(w[0], w[1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::DistanceMatrix;
    use proptest::prelude::*;

    fn grid(n: usize) -> FiniteMetricSystem {
        FiniteMetricSystem::circle_doubling(n).unwrap()
    }

    fn swap() -> FiniteMetricSystem {
        FiniteMetricSystem::new(vec![], DistanceMatrix::line_grid(2), vec![1, 0]).unwrap()
    }

    /// Independent oracle: repeated boolean powers on a dense `Vec<Vec<bool>>`.
    fn power_oracle(g: &ChainGraph<'_>, m: usize) -> Vec<Vec<bool>> {
        let n = g.len();
        let a: Vec<Vec<bool>> = (0..n).map(|u| (0..n).map(|v| g.has_edge(u, v)).collect()).collect();
        let mut p: Vec<Vec<bool>> = (0..n).map(|u| (0..n).map(|v| u == v).collect()).collect();
        for _ in 0..m {
            p = (0..n)
                .map(|i| (0..n).map(|j| (0..n).any(|k| p[i][k] && a[k][j])).collect())
                .collect();
        }
        p
    }

    #[test]
    fn extreme_thresholds() {
        let sys = grid(6);
        assert!(build_chain_graph(&sys, 1.0).unwrap().is_complete());
        let g0 = build_chain_graph(&sys, 0.0).unwrap();
        for u in 0..6 {
            assert_eq!(g0.out_neighbors(u), &[sys.image(u)]);
        }
        assert!(build_chain_graph(&sys, 1.5).is_err());
    }

    #[test]
    fn doubling_grid_four_at_quarter() {
        let sys = grid(4);
        let g = build_chain_graph(&sys, 0.25).unwrap();
        assert_eq!(g.out_neighbors(0), &[0, 1, 3]);
        assert_eq!(g.out_neighbors(1), &[1, 2, 3]);
        assert_eq!(g.out_neighbors(2), &[0, 1, 3]);
        assert_eq!(g.out_neighbors(3), &[1, 2, 3]);

        let cert = mixing_certificate(&g);
        assert!(cert.strongly_connected);
        assert_eq!(cert.period, 1);
        assert_eq!(cert.mixing_constant, Some(2));
        assert_eq!(cert.minimality_witness, Some((0, 2)));
        assert!(!power_oracle(&g, 1)[0][2]);
        for m in 2..8 {
            assert!(power_oracle(&g, m).iter().flatten().all(|&b| b));
        }
    }

    #[test]
    fn complete_graph_mixes_immediately() {
        let sys = grid(5);
        let cert = mixing_certificate(&build_chain_graph(&sys, 1.0).unwrap());
        assert_eq!(cert.mixing_constant, Some(1));
    }

    #[test]
    fn swap_has_period_two() {
        let sys = swap();
        let g = build_chain_graph(&sys, 0.5).unwrap();
        let cert = mixing_certificate(&g);
        assert!(cert.strongly_connected);
        assert_eq!(cert.period, 2);
        assert_eq!(cert.mixing_constant, None);
        assert!(matches!(cert.require_mixing(), Err(Error::NotMixing { period: 2, .. })));
        assert!(matches!(finite_chain(&g, 0, 0, 3), Err(Error::NoChain { length: 3, .. })));
        for m in 1..=wielandt_bound(2) + 2 {
            assert!(!power_oracle(&g, m).iter().flatten().all(|&b| b));
        }
    }

    #[test]
    fn disconnected_permutation() {
        let sys = FiniteMetricSystem::new(vec![], DistanceMatrix::line_grid(2), vec![0, 1]).unwrap();
        let cert = mixing_certificate(&build_chain_graph(&sys, 0.5).unwrap());
        assert!(!cert.strongly_connected);
        assert_eq!(cert.components, 2);
        assert_eq!(cert.period, 1);
        assert!(!cert.is_mixing());
    }

    #[test]
    fn finite_chain_examples() {
        let sys = grid(4);
        let g = build_chain_graph(&sys, 0.25).unwrap();
        assert_eq!(finite_chain(&g, 0, 2, 2).unwrap(), vec![0, 1, 2]);
        assert_eq!(finite_chain(&g, 0, 0, 3).unwrap(), vec![0, 0, 0, 0]);
        assert!(matches!(finite_chain(&g, 0, 2, 1), Err(Error::NoChain { .. })));
        let walk = finite_chain(&g, 3, 0, 5).unwrap();
        assert!(is_delta_chain(&FiniteTrajectory::from_zero(walk).unwrap(), &g));
    }

    #[test]
    fn is_delta_chain_examples() {
        let sys = grid(4);
        let g = build_chain_graph(&sys, 0.25).unwrap();
        assert!(!is_delta_chain(&FiniteTrajectory::from_zero(vec![0, 2]).unwrap(), &g));
        let g0 = build_chain_graph(&sys, 0.0).unwrap();
        assert!(is_delta_chain(&sys.orbit(1, 6), &g0));
    }

    #[test]
    fn family_of_doubling_grid_eight() {
        let sys = grid(8);
        let fam = chain_family(&sys, 8).unwrap();
        assert_eq!(fam.graphs.len(), 8);
        assert!(fam.graphs[0].is_complete());
        for w in fam.graphs.windows(2) {
            assert!(w[1].is_subgraph_of(&w[0]));
        }
        let finest = &fam.graphs[7];
        for u in 0..8 {
            let t = sys.image(u);
            assert_eq!(finest.out_neighbors(u), {
                let mut v = vec![(t + 7) % 8, t, (t + 1) % 8];
                v.sort_unstable();
                v
            });
        }
        assert_eq!(fam.critical_deltas, vec![0.0, 0.125, 0.25, 0.375, 0.5]);
        assert_eq!(chain_family(&sys, 1).unwrap().graphs.len(), 1);
    }

    #[test]
    fn dot_and_adjacency_export() {
        let sys = grid(4);
        let g = build_chain_graph(&sys, 0.25).unwrap();
        assert_eq!(g.to_adjacency_list().lines().next(), Some("0: 0 1 3"));
        let dot = g.to_dot();
        assert!(dot.starts_with("digraph chain {"));
        assert_eq!(dot.matches("->").count(), g.edge_count());
    }

    proptest! {
        #[test]
        fn edges_monotone_and_contain_the_map(n in 1usize..10, seed in any::<u64>(), d1 in 0.0f64..1.0, d2 in 0.0f64..1.0) {
            let sys = FiniteMetricSystem::random_metric(n, seed).unwrap();
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            let g_lo = build_chain_graph(&sys, lo).unwrap();
            let g_hi = build_chain_graph(&sys, hi).unwrap();
            prop_assert!(g_lo.is_subgraph_of(&g_hi));
            for u in 0..n {
                prop_assert!(g_lo.has_edge(u, sys.image(u)));
            }
        }

        #[test]
        fn mixing_constant_is_tight(n in 2usize..9, seed in any::<u64>(), delta in 0.2f64..0.9) {
            let sys = FiniteMetricSystem::random_metric(n, seed).unwrap();
            let g = build_chain_graph(&sys, delta).unwrap();
            let cert = mixing_certificate(&g);
            if let Some(m) = cert.mixing_constant {
                prop_assert!(m <= wielandt_bound(n));
                for len in m..=m + n {
                    for x in 0..n {
                        for y in 0..n {
                            prop_assert!(finite_chain(&g, x, y, len).is_ok());
                        }
                    }
                }
                let (x, y) = cert.minimality_witness.expect("witness");
                if m > 1 {
                    prop_assert!(finite_chain(&g, x, y, m - 1).is_err());
                }
                prop_assert_eq!(cert.period, 1);
            } else if cert.strongly_connected {
                prop_assert!(cert.period > 1);
                prop_assert!(!power_oracle(&g, wielandt_bound(n)).iter().flatten().all(|&b| b));
            }
        }
    }
}
