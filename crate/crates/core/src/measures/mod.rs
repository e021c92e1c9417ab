//! Invariant measures on chain subshifts and distances between them.
//!
//! Two classes are represented exactly: uniform measures on periodic orbits
//! (the ergodic building blocks) and finite mixtures of those. Stationary
//! Markov measures on a chain graph are in [`markov`].
//!
//! # ρ̄ between periodic-orbit measures
//!
//! The joinings of two periodic-orbit measures of periods `p` and `q` form a
//! simplex whose extreme (ergodic) points are the uniform measures on the
//! orbits of `(S^a x, y)` under the product shift, one for each phase
//! `a mod gcd(p, q)`. The cost functional is linear, so its infimum over the
//! simplex is attained at one of these phases and
//! `ρ̄ = min_a (1/L) Σ_{t<L} ρ(x_{a+t}, y_t)` with `L = lcm(p, q)`. The tests
//! cross-check this against a brute-force LP over all orbit couplings.
//!
//! For finite mixtures of distinct periodic orbits an ergodic decomposition of
//! any joining couples the mixture weights, so ρ̄ (and π̄) between mixtures is
//! the optimal transport between weight vectors with component distances as
//! cost.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::chain::{mixing_certificate, finite_chain, ChainGraph};
use crate::error::{Error, Result};
use crate::par::*;
use crate::system::{pi_tail_bound, DistanceMatrix, FiniteMetricSystem, FiniteTrajectory};

pub mod lp;
pub mod markov;
pub mod transport;

pub use markov::{rho_bar_markov_upper, MarkovMeasure};
pub use transport::{solve_transport, TransportSolution};

const MASS_TOL: f64 = 1e-9;

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

/// Probability vector on the points of a finite space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteMeasure {
    weights: Vec<f64>,
}

impl FiniteMeasure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|&w| !w.is_finite() || w < 0.0) {
            return Err(Error::invalid("measure weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::invalid(format!("measure weights sum to {total}, not 1")));
        }
        Ok(FiniteMeasure { weights })
    }

    pub fn dirac(n: usize, u: usize) -> Self {
        let mut weights = vec![0.0; n];
        weights[u] = 1.0;
        FiniteMeasure { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Uniform measure on the shift orbit of the periodic sequence `word^∞`.
///
/// The word is stored canonically: reduced to its primitive root and rotated
/// to its lexicographically least rotation, so two values are equal exactly
/// when they describe the same measure.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct PeriodicOrbitMeasure {
    word: Vec<usize>,
}

impl TryFrom<Vec<usize>> for PeriodicOrbitMeasure {
    type Error = Error;
    fn try_from(word: Vec<usize>) -> Result<Self> {
        PeriodicOrbitMeasure::new(word)
    }
}

impl From<PeriodicOrbitMeasure> for Vec<usize> {
    fn from(m: PeriodicOrbitMeasure) -> Self {
        m.word
    }
}

impl PeriodicOrbitMeasure {
    pub fn new(word: Vec<usize>) -> Result<Self> {
        if word.is_empty() {
            return Err(Error::invalid("periodic word must be non-empty"));
        }
        let p = word.len();
        let root = (1..=p)
            .find(|&d| p % d == 0 && (d..p).all(|i| word[i] == word[i - d]))
            .unwrap_or(p);
        let word = &word[..root];
        let best = (0..root)
            .min_by(|&a, &b| word[a..].iter().chain(&word[..a]).cmp(word[b..].iter().chain(&word[..b])))
            .unwrap_or(0);
        let mut canon = word[best..].to_vec();
        canon.extend_from_slice(&word[..best]);
        Ok(PeriodicOrbitMeasure { word: canon })
    }

    pub fn fixed_point(u: usize) -> Self {
        PeriodicOrbitMeasure { word: vec![u] }
    }

    pub fn word(&self) -> &[usize] {
        &self.word
    }

    pub fn period(&self) -> usize {
        self.word.len()
    }

    /// Coordinate `t` of the canonical periodic sequence.
    pub fn at(&self, t: i64) -> usize {
        self.word[t.rem_euclid(self.word.len() as i64) as usize]
    }

    /// The canonical periodic sequence on coordinates `from..=to`.
    pub fn trajectory(&self, from: i64, to: i64) -> FiniteTrajectory {
        FiniteTrajectory::new(from, (from..=to).map(|t| self.at(t)).collect())
            .expect("non-empty window")
    }

    /// Whether every cyclic step of the word is an edge of `g`.
    pub fn is_cycle_of(&self, g: &ChainGraph<'_>) -> bool {
        let p = self.word.len();
        self.word.iter().all(|&u| u < g.len())
            && (0..p).all(|i| g.has_edge(self.word[i], self.word[(i + 1) % p]))
    }

    pub fn cylinders(&self, depth: usize) -> Result<CylinderDistributions> {
        empirical_measure(self, depth)
    }
}

/// Distributions of blocks of every length `1..=depth`, each a sorted list
/// of `(block, probability)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CylinderDistributions {
    levels: Vec<Vec<(Vec<usize>, f64)>>,
}

impl CylinderDistributions {
    fn from_maps(maps: Vec<BTreeMap<Vec<usize>, f64>>) -> Self {
        let levels = maps
            .into_iter()
            .map(|m| m.into_iter().filter(|&(_, p)| p > 0.0).collect())
            .collect();
        CylinderDistributions { levels }
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Blocks of length `w` (1-based) with their probabilities.
    pub fn level(&self, w: usize) -> &[(Vec<usize>, f64)] {
        &self.levels[w - 1]
    }

    /// The length-1 distribution as a measure on `n` points.
    pub fn marginal(&self, n: usize) -> FiniteMeasure {
        let mut weights = vec![0.0; n];
        for (b, p) in self.level(1) {
            weights[b[0]] += p;
        }
        FiniteMeasure { weights }
    }

    /// Weighted combination of several distributions, truncated to the
    /// smallest depth.
    pub fn mixture(parts: &[(&CylinderDistributions, f64)]) -> Result<Self> {
        let depth = parts.iter().map(|(c, _)| c.depth()).min().ok_or(Error::EmptySet)?;
        let mut maps = vec![BTreeMap::new(); depth];
        for (c, w) in parts {
            for (level, map) in c.levels.iter().zip(maps.iter_mut()) {
                for (b, p) in level {
                    *map.entry(b.clone()).or_insert(0.0) += w * p;
                }
            }
        }
        Ok(Self::from_maps(maps))
    }
}

/// Block distributions of the periodic-orbit measure, read cyclically.
pub fn empirical_measure(pm: &PeriodicOrbitMeasure, depth: usize) -> Result<CylinderDistributions> {
    if depth == 0 {
        return Err(Error::invalid("cylinder depth must be at least 1"));
    }
    let p = pm.period();
    let mass = 1.0 / p as f64;
    let maps = (1..=depth)
        .map(|w| {
            let mut map = BTreeMap::new();
            for s in 0..p {
                let block: Vec<usize> = (0..w).map(|i| pm.word[(s + i) % p]).collect();
                *map.entry(block).or_insert(0.0) += mass;
            }
            map
        })
        .collect();
    Ok(CylinderDistributions::from_maps(maps))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingStatus {
    Optimal,
    Feasible,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingPlan {
    /// Row-major transport matrix between two finite measures.
    Transport { rows: usize, cols: usize, flow: Vec<f64> },
    /// Stationary distribution on state pairs and the joint kernel between
    /// them, as sparse `(pair, pair, mass)` edge flows.
    Joint {
        pairs: Vec<((usize, usize), f64)>,
        flows: Vec<((usize, usize), (usize, usize), f64)>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingResult {
    pub value: f64,
    /// A certified lower bound on the quantity `value` bounds from above,
    /// when `value` is only an upper bound.
    pub lower_bound: Option<f64>,
    pub plan: CouplingPlan,
    pub status: CouplingStatus,
}

/// Exact Wasserstein-1 distance between two measures on the same points.
pub fn w1_distance(mu: &FiniteMeasure, nu: &FiniteMeasure, cost: &DistanceMatrix) -> Result<CouplingResult> {
    if mu.len() != nu.len() || mu.len() != cost.len() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {} vs {} over {} points",
            mu.len(),
            nu.len(),
            cost.len()
        )));
    }
    let sol = solve_transport(&mu.weights, &nu.weights, |i, j| cost.get(i, j))?;
    Ok(CouplingResult {
        value: sol.cost,
        lower_bound: None,
        plan: CouplingPlan::Transport { rows: sol.rows, cols: sol.cols, flow: sol.flow },
        status: CouplingStatus::Optimal,
    })
}

/// A distance between periodic-orbit measures together with the phase of the
/// optimal ergodic joining.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseDistance {
    pub value: f64,
    /// Half-width of the truncation error; the true value lies in
    /// `[value − error_bar, value]`.
    pub error_bar: f64,
    /// Shift `a` applied to the first word in the optimal joining.
    pub phase: usize,
    /// Length of the joint orbit, `lcm(p, q)`.
    pub joint_period: usize,
}

fn min_over_phases(
    pm: &PeriodicOrbitMeasure,
    qm: &PeriodicOrbitMeasure,
    cost_at: impl Fn(usize, usize) -> f64,
) -> (f64, usize, usize) {
    let (p, q) = (pm.period(), qm.period());
    let l = lcm(p, q);
    let mut best = (f64::INFINITY, 0);
    for a in 0..gcd(p, q) {
        let avg = (0..l).map(|t| cost_at(a, t)).sum::<f64>() / l as f64;
        if avg < best.0 - 1e-15 {
            best = (avg, a);
        }
    }
    (best.0, best.1, l)
}

/// Exact ρ̄ between two periodic-orbit measures.
pub fn rho_bar_periodic(pm: &PeriodicOrbitMeasure, qm: &PeriodicOrbitMeasure, cost: &DistanceMatrix) -> PhaseDistance {
    let (p, q) = (pm.period(), qm.period());
    let (value, phase, l) = min_over_phases(pm, qm, |a, t| cost.get(pm.word[(a + t) % p], qm.word[t % q]));
    PhaseDistance { value, error_bar: 0.0, phase, joint_period: l }
}

/// The unrotated aligned average `(1/L) Σ ρ(x_t, y_t)` over the joint period.
pub fn aligned_average(pm: &PeriodicOrbitMeasure, qm: &PeriodicOrbitMeasure, cost: &DistanceMatrix) -> f64 {
    let l = lcm(pm.period(), qm.period());
    (0..l).map(|t| cost.get(pm.at(t as i64), qm.at(t as i64))).sum::<f64>() / l as f64
}

/// π̄ between two periodic-orbit measures with π truncated at `radius`.
///
/// Coordinates of a periodic sequence are available everywhere, so the only
/// error is the tail: undecided terms contribute `1/(K+2)` and the reported
/// value is an upper bound within `error_bar` of the truth.
pub fn pi_bar_periodic(
    pm: &PeriodicOrbitMeasure,
    qm: &PeriodicOrbitMeasure,
    cost: &DistanceMatrix,
    radius: usize,
) -> PhaseDistance {
    let (p, q) = (pm.period(), qm.period());
    let tail = pi_tail_bound(radius);
    let r = radius as i64;
    let (value, phase, l) = min_over_phases(pm, qm, |a, t| {
        let mut best = 0.0f64;
        for k in -r..=r {
            let s = t as i64 + k;
            let x = pm.word[(a as i64 + s).rem_euclid(p as i64) as usize];
            let y = qm.word[s.rem_euclid(q as i64) as usize];
            best = best.max(cost.get(x, y).min(1.0 / (k.unsigned_abs() as f64 + 1.0)));
        }
        best.max(tail)
    });
    PhaseDistance { value, error_bar: tail, phase, joint_period: l }
}

/// Finite convex combination of distinct periodic-orbit measures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureMeasure {
    components: Vec<(PeriodicOrbitMeasure, f64)>,
}

impl MixtureMeasure {
    /// Merges repeated components and drops zero weights. Weights must be
    /// nonnegative and sum to 1.
    pub fn new(parts: Vec<(PeriodicOrbitMeasure, f64)>) -> Result<Self> {
        if parts.iter().any(|(_, w)| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("mixture weights must be finite and nonnegative"));
        }
        let total: f64 = parts.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::invalid(format!("mixture weights sum to {total}, not 1")));
        }
        let mut merged: BTreeMap<PeriodicOrbitMeasure, f64> = BTreeMap::new();
        for (m, w) in parts {
            if w > 0.0 {
                *merged.entry(m).or_insert(0.0) += w;
            }
        }
        Ok(MixtureMeasure { components: merged.into_iter().collect() })
    }

    pub fn ergodic(m: PeriodicOrbitMeasure) -> Self {
        MixtureMeasure { components: vec![(m, 1.0)] }
    }

    pub fn components(&self) -> &[(PeriodicOrbitMeasure, f64)] {
        &self.components
    }

    pub fn is_ergodic(&self) -> bool {
        self.components.len() == 1
    }

    pub fn cylinders(&self, depth: usize) -> Result<CylinderDistributions> {
        let parts = self
            .components
            .iter()
            .map(|(m, w)| Ok((empirical_measure(m, depth)?, *w)))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<_> = parts.iter().map(|(c, w)| (c, *w)).collect();
        CylinderDistributions::mixture(&refs)
    }

    fn transport_between(&self, other: &Self, d: impl Fn(&PeriodicOrbitMeasure, &PeriodicOrbitMeasure) -> f64) -> Result<f64> {
        let a: Vec<f64> = self.components.iter().map(|c| c.1).collect();
        let b: Vec<f64> = other.components.iter().map(|c| c.1).collect();
        let costs: Vec<f64> = self
            .components
            .iter()
            .flat_map(|(x, _)| other.components.iter().map(|(y, _)| d(x, y)).collect::<Vec<_>>())
            .collect();
        let n = b.len();
        Ok(solve_transport(&a, &b, |i, j| costs[i * n + j])?.cost)
    }

    /// Exact ρ̄ between two mixtures.
    pub fn rho_bar(&self, other: &Self, cost: &DistanceMatrix) -> Result<f64> {
        self.transport_between(other, |x, y| rho_bar_periodic(x, y, cost).value)
    }

    /// π̄ between two mixtures; an upper bound within `1/(radius+2)`.
    pub fn pi_bar(&self, other: &Self, cost: &DistanceMatrix, radius: usize) -> Result<f64> {
        if self.is_ergodic() && other.is_ergodic() {
            return Ok(pi_bar_periodic(&self.components[0].0, &other.components[0].0, cost, radius).value);
        }
        self.transport_between(other, |x, y| pi_bar_periodic(x, y, cost, radius).value)
    }
}

/// Matrix of `d(a, b)` computed row-parallel.
pub fn pairwise<A: Sync, B: Sync>(a: &[A], b: &[B], d: impl Fn(&A, &B) -> f64 + Sync) -> Vec<Vec<f64>> {
    a.par_iter().map(|x| b.iter().map(|y| d(x, y)).collect()).collect()
}

/// `max(sup_a inf_b d(a,b), sup_b inf_a d(a,b))` over finite sets.
pub fn hausdorff_distance<A: Sync, B: Sync>(a: &[A], b: &[B], d: impl Fn(&A, &B) -> f64 + Sync) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    Ok(hausdorff_from_matrix(&pairwise(a, b, d)))
}

/// Hausdorff distance read off a precomputed non-empty distance matrix.
pub fn hausdorff_from_matrix(m: &[Vec<f64>]) -> f64 {
    let rows = m.iter().map(|r| r.iter().copied().fold(f64::INFINITY, f64::min)).fold(0.0, f64::max);
    let cols = (0..m[0].len())
        .map(|j| m.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    rows.max(cols)
}

/// Periodic-orbit measures of a chain graph up to a period cap.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErgodicSet {
    pub measures: Vec<PeriodicOrbitMeasure>,
    pub max_period: usize,
    pub cap: usize,
    /// True when more than `cap` cycles exist; `measures` then holds the
    /// first `cap` in (length, lexicographic) order.
    pub truncated: bool,
}

impl ErgodicSet {
    pub fn len(&self) -> usize {
        self.measures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measures.is_empty()
    }
}

/// Simple cycles of length exactly `len` whose least vertex is `start`, in
/// lexicographic order, at most `cap` of them.
fn cycles_from(g: &ChainGraph<'_>, start: usize, len: usize, cap: usize) -> Vec<Vec<usize>> {
    let mut found = Vec::new();
    let mut path = vec![start];
    let mut on_path = vec![false; g.len()];
    on_path[start] = true;
    // Stack of neighbour cursors, one per path vertex.
    let mut cursor = vec![0usize];
    while let Some(&u) = path.last() {
        if found.len() >= cap {
            break;
        }
        let depth = path.len();
        let nbrs = g.out_neighbors(u);
        let i = *cursor.last().unwrap();
        if i >= nbrs.len() || depth == len {
            if depth == len && i == 0 && g.has_edge(u, start) {
                found.push(path.clone());
            }
            on_path[u] = false;
            path.pop();
            cursor.pop();
            continue;
        }
        *cursor.last_mut().unwrap() += 1;
        let v = nbrs[i];
        if v > start && !on_path[v] {
            on_path[v] = true;
            path.push(v);
            cursor.push(0);
        }
    }
    found
}

/// All simple cycles of `g` of length at most `max_period`, as canonical
/// periodic-orbit measures ordered by length then lexicographically. At most
/// `cap` are returned.
pub fn ergodic_measures_of_graph(g: &ChainGraph<'_>, max_period: usize, cap: usize) -> Result<ErgodicSet> {
    if max_period == 0 {
        return Err(Error::invalid("period cap must be at least 1"));
    }
    let mut measures = Vec::new();
    let mut truncated = false;
    'lengths: for len in 1..=max_period {
        // A simple cycle listed from its least vertex is already the least
        // rotation, and ascending neighbour order makes the DFS lexicographic.
        let per_start: Vec<Vec<Vec<usize>>> = (0..g.len())
            .into_par_iter()
            .map(|s| cycles_from(g, s, len, cap.saturating_add(1)))
            .collect();
        for word in per_start.into_iter().flatten() {
            if measures.len() == cap {
                truncated = true;
                break 'lengths;
            }
            measures.push(PeriodicOrbitMeasure { word });
        }
    }
    Ok(ErgodicSet { measures, max_period, cap, truncated })
}

/// Periodic-orbit measure close to a mixture of periodic-orbit measures.
///
/// Component `i` contributes its word repeated `round(w_i·L/p_i)` times; the
/// blocks are joined cyclically by chains of length `M`, the mixing constant
/// of `g`, so the result is a cyclic δ-chain.
pub fn sigmund_approximation(
    target: &[(PeriodicOrbitMeasure, f64)],
    g: &ChainGraph<'_>,
    scale: usize,
) -> Result<PeriodicOrbitMeasure> {
    let mixture = MixtureMeasure::new(target.to_vec())?;
    let m = mixing_certificate(g).require_mixing()?;
    for (i, (pm, _)) in mixture.components().iter().enumerate() {
        if !pm.is_cycle_of(g) {
            let coordinate = (0..pm.period())
                .find(|&t| pm.word[t] >= g.len() || !g.has_edge(pm.word[t], pm.word[(t + 1) % pm.period()]))
                .unwrap_or(0);
            return Err(Error::NotAChain { segment: i, coordinate: coordinate as i64 });
        }
    }
    if mixture.is_ergodic() {
        return Ok(mixture.components()[0].0.clone());
    }
    let blocks: Vec<Vec<usize>> = mixture
        .components()
        .iter()
        .enumerate()
        .map(|(i, (pm, w))| {
            let reps = (w * scale as f64 / pm.period() as f64).round() as usize;
            if reps == 0 {
                return Err(Error::DegenerateWeights { component: i, scale });
            }
            Ok(pm.word.repeat(reps))
        })
        .collect::<Result<_>>()?;
    let mut word = Vec::new();
    for (i, block) in blocks.iter().enumerate() {
        word.extend_from_slice(block);
        let next = &blocks[(i + 1) % blocks.len()];
        let link = finite_chain(g, *block.last().unwrap(), next[0], m)?;
        word.extend_from_slice(&link[1..link.len() - 1]);
    }
    PeriodicOrbitMeasure::new(word)
}

/// `Σ_{w=1}^{m} 2^{−w} W1(level-w blocks)` with block cost the largest
/// coordinate distance.
pub fn weakstar_proxy(
    a: &CylinderDistributions,
    b: &CylinderDistributions,
    cost: &DistanceMatrix,
    depth: usize,
) -> Result<f64> {
    let available = a.depth().min(b.depth());
    if depth > available || depth == 0 {
        return Err(Error::DepthMismatch { requested: depth, available });
    }
    let mut total = 0.0;
    for w in 1..=depth {
        let (la, lb) = (a.level(w), b.level(w));
        let sa: Vec<f64> = la.iter().map(|x| x.1).collect();
        let sb: Vec<f64> = lb.iter().map(|x| x.1).collect();
        let block_cost = |i: usize, j: usize| {
            la[i].0.iter().zip(&lb[j].0).map(|(&x, &y)| cost.get(x, y)).fold(0.0, f64::max)
        };
        total += solve_transport(&sa, &sb, block_cost)?.cost / (1u64 << w) as f64;
    }
    Ok(total)
}

/// On-disk measure description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureFile {
    Periodic { word: Vec<usize> },
    Markov {
        #[serde(rename = "P")]
        p: Vec<Vec<f64>>,
        support: Vec<usize>,
    },
}

/// A parsed measure file.
#[derive(Clone, Debug)]
pub enum AnyMeasure {
    Periodic(PeriodicOrbitMeasure),
    Markov(MarkovMeasure),
}

impl MeasureFile {
    pub fn into_measure(self, sys: &FiniteMetricSystem) -> Result<AnyMeasure> {
        let check = |ids: &[usize]| match ids.iter().find(|&&u| u >= sys.len()) {
            Some(u) => Err(Error::invalid(format!("point {u} out of range for {} points", sys.len()))),
            None => Ok(()),
        };
        match self {
            MeasureFile::Periodic { word } => {
                check(&word)?;
                Ok(AnyMeasure::Periodic(PeriodicOrbitMeasure::new(word)?))
            }
            MeasureFile::Markov { p, support } => {
                check(&support)?;
                Ok(AnyMeasure::Markov(MarkovMeasure::new(support, p)?))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::build_chain_graph;
    use crate::measures::lp::LinearProgram;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn discrete(n: usize) -> DistanceMatrix {
        DistanceMatrix::from_fn(n, |i, j| if i == j { 0.0 } else { 1.0 })
    }

    fn pm(w: &[usize]) -> PeriodicOrbitMeasure {
        PeriodicOrbitMeasure::new(w.to_vec()).unwrap()
    }

    /// Brute force: minimise over every coupling of the two uniform orbit
    /// measures on `p × q` orbit positions whose pushforward along the joint
    /// shift is itself (a shift-invariant coupling of positions).
    fn rho_bar_lp(a: &PeriodicOrbitMeasure, b: &PeriodicOrbitMeasure, cost: &DistanceMatrix) -> f64 {
        let (p, q) = (a.period(), b.period());
        let var = |i: usize, j: usize| i * q + j;
        let mut lp = LinearProgram::new(p * q);
        for i in 0..p {
            lp.add_eq((0..q).map(|j| (var(i, j), 1.0)).collect(), 1.0 / p as f64);
        }
        for j in 0..q {
            lp.add_eq((0..p).map(|i| (var(i, j), 1.0)).collect(), 1.0 / q as f64);
        }
        for i in 0..p {
            for j in 0..q {
                let prev = var((i + p - 1) % p, (j + q - 1) % q);
                lp.add_eq(vec![(var(i, j), 1.0), (prev, -1.0)], 0.0);
            }
        }
        let c = (0..p * q).map(|k| cost.get(a.word()[k / q], b.word()[k % q])).collect();
        lp.set_cost(c);
        lp.solve().unwrap().objective
    }

    #[test]
    fn canonical_words() {
        assert_eq!(pm(&[2, 0, 1]).word(), &[0, 1, 2]);
        assert_eq!(pm(&[1, 0, 1, 0]).word(), &[0, 1]);
        assert_eq!(pm(&[0, 0, 1, 0]).word(), &[0, 0, 0, 1]);
        assert_eq!(pm(&[5, 5, 5]).word(), &[5]);
        assert!(PeriodicOrbitMeasure::new(vec![]).is_err());
    }

    #[test]
    fn empirical_measure_examples() {
        let c = empirical_measure(&pm(&[3]), 3).unwrap();
        for w in 1..=3 {
            assert_eq!(c.level(w), &[(vec![3; w], 1.0)]);
        }
        let c = empirical_measure(&pm(&[0, 1]), 1).unwrap();
        assert_eq!(c.level(1), &[(vec![0], 0.5), (vec![1], 0.5)]);
        let c = empirical_measure(&pm(&[0, 0, 1]), 2).unwrap();
        let third = 1.0 / 3.0;
        assert_eq!(c.level(2), &[(vec![0, 0], third), (vec![0, 1], third), (vec![1, 0], third)]);
        assert!(empirical_measure(&pm(&[0]), 0).is_err());
    }

    #[test]
    fn w1_examples() {
        let d = discrete(2);
        let a = FiniteMeasure::new(vec![1.0, 0.0]).unwrap();
        let h = FiniteMeasure::new(vec![0.5, 0.5]).unwrap();
        let b = FiniteMeasure::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(w1_distance(&a, &a, &d).unwrap().value, 0.0);
        assert!((w1_distance(&a, &h, &d).unwrap().value - 0.5).abs() < 1e-12);
        assert_eq!(w1_distance(&a, &b, &d).unwrap().value, 1.0);
        assert!(FiniteMeasure::new(vec![0.5, 0.4]).is_err());
    }

    #[test]
    fn rho_bar_examples() {
        let d = discrete(2);
        let uv = pm(&[0, 1]);
        assert_eq!(rho_bar_periodic(&uv, &uv, &d).value, 0.0);
        assert_eq!(rho_bar_periodic(&uv, &PeriodicOrbitMeasure::new(vec![1, 0]).unwrap(), &d).value, 0.0);
        let uuv = pm(&[0, 0, 1]);
        let r = rho_bar_periodic(&uv, &uuv, &d);
        assert!((r.value - 0.5).abs() < 1e-12);
        assert_eq!(r.joint_period, 6);
        assert!((rho_bar_lp(&uv, &uuv, &d) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn rho_bar_phase_formula_matches_lp() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cost = DistanceMatrix::circle_grid(4);
        for _ in 0..150 {
            let a = pm(&(0..rng.gen_range(1..6)).map(|_| rng.gen_range(0..4)).collect::<Vec<_>>());
            let b = pm(&(0..rng.gen_range(1..6)).map(|_| rng.gen_range(0..4)).collect::<Vec<_>>());
            let exact = rho_bar_periodic(&a, &b, &cost).value;
            let lp = rho_bar_lp(&a, &b, &cost);
            assert!((exact - lp).abs() < 1e-9, "{a:?} {b:?}: {exact} vs {lp}");
        }
    }

    #[test]
    fn rho_bar_metric_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cost = DistanceMatrix::circle_grid(5);
        let word = |rng: &mut ChaCha8Rng| {
            pm(&(0..rng.gen_range(1..7)).map(|_| rng.gen_range(0..5)).collect::<Vec<_>>())
        };
        for _ in 0..300 {
            let (a, b, c) = (word(&mut rng), word(&mut rng), word(&mut rng));
            let ab = rho_bar_periodic(&a, &b, &cost).value;
            let ba = rho_bar_periodic(&b, &a, &cost).value;
            let bc = rho_bar_periodic(&b, &c, &cost).value;
            let ac = rho_bar_periodic(&a, &c, &cost).value;
            assert!((ab - ba).abs() < 1e-12);
            assert!(ac <= ab + bc + 1e-9);
            assert_eq!(ab == 0.0, a == b);
            assert!(ab <= aligned_average(&a, &b, &cost) + 1e-12);
            let marg = w1_distance(
                &empirical_measure(&a, 1).unwrap().marginal(5),
                &empirical_measure(&b, 1).unwrap().marginal(5),
                &cost,
            )
            .unwrap()
            .value;
            assert!(marg <= ab + 1e-9);
        }
    }

    #[test]
    fn pi_bar_examples() {
        let cost = DistanceMatrix::circle_grid(4);
        let k = 10;
        let tail = pi_tail_bound(k);
        let a = pm(&[0, 1, 3]);
        assert!(pi_bar_periodic(&a, &a, &cost, k).value <= tail + 1e-15);
        let (u, v) = (pm(&[0]), pm(&[1]));
        let r = pi_bar_periodic(&u, &v, &cost, k);
        assert!((r.value - cost.get(0, 1)).abs() < 1e-12);
        let b = pm(&[2, 1]);
        assert!(pi_bar_periodic(&a, &b, &cost, k).value >= rho_bar_periodic(&a, &b, &cost).value - tail);
    }

    #[test]
    fn mixtures_reduce_to_components() {
        let cost = discrete(3);
        let (a, b, c) = (pm(&[0]), pm(&[1]), pm(&[0, 2]));
        let x = MixtureMeasure::new(vec![(a.clone(), 0.5), (b.clone(), 0.5)]).unwrap();
        let y = MixtureMeasure::new(vec![(a.clone(), 0.5), (c.clone(), 0.5)]).unwrap();
        // move half the mass from b to c at ρ̄(b, c) = 1
        assert!((x.rho_bar(&y, &cost).unwrap() - 0.5).abs() < 1e-12);
        let single = MixtureMeasure::ergodic(a.clone());
        assert_eq!(single.rho_bar(&MixtureMeasure::ergodic(a), &cost).unwrap(), 0.0);
        let merged = MixtureMeasure::new(vec![(b.clone(), 0.25), (b, 0.75)]).unwrap();
        assert!(merged.is_ergodic());
    }

    #[test]
    fn hausdorff_examples() {
        let d = |a: &f64, b: &f64| (a - b).abs();
        assert_eq!(hausdorff_distance(&[0.0, 1.0], &[1.0, 0.0], d).unwrap(), 0.0);
        assert_eq!(hausdorff_distance(&[0.0], &[0.0, 0.7], d).unwrap(), 0.7);
        assert_eq!(hausdorff_distance(&[0.2], &[0.5], d).unwrap(), 0.3);
        assert!(matches!(hausdorff_distance::<f64, f64>(&[], &[1.0], d), Err(Error::EmptySet)));
    }

    #[test]
    fn ergodic_enumeration_examples() {
        // δ = 0 on a permutation: exactly its cycles.
        let sys = FiniteMetricSystem::circle_rotation(6, 2).unwrap();
        let g = build_chain_graph(&sys, 0.0).unwrap();
        let e = ergodic_measures_of_graph(&g, 6, 100).unwrap();
        assert_eq!(e.measures, vec![pm(&[0, 2, 4]), pm(&[1, 3, 5])]);

        let sys = FiniteMetricSystem::circle_doubling(2).unwrap();
        let g = build_chain_graph(&sys, 1.0).unwrap();
        let e = ergodic_measures_of_graph(&g, 2, 100).unwrap();
        assert_eq!(e.measures, vec![pm(&[0]), pm(&[1]), pm(&[0, 1])]);

        let sys = FiniteMetricSystem::circle_doubling(4).unwrap();
        let g = build_chain_graph(&sys, 0.25).unwrap();
        let e = ergodic_measures_of_graph(&g, 1, 100).unwrap();
        assert_eq!(e.measures, vec![pm(&[0]), pm(&[1]), pm(&[3])]);
        assert!(!e.truncated);

        let e = ergodic_measures_of_graph(&g, 4, 4).unwrap();
        assert!(e.truncated);
        assert_eq!(e.len(), 4);
        assert_eq!(e.measures[..3], [pm(&[0]), pm(&[1]), pm(&[3])]);
    }

    #[test]
    fn ergodic_enumeration_counts_match_brute_force() {
        let sys = FiniteMetricSystem::random_metric(7, 5).unwrap();
        let g = build_chain_graph(&sys, 0.5).unwrap();
        let e = ergodic_measures_of_graph(&g, 4, usize::MAX).unwrap();
        // brute force over all words of length ≤ 4 that are simple cycles
        let mut brute = std::collections::BTreeSet::new();
        for len in 1..=4u32 {
            for code in 0..7usize.pow(len) {
                let w: Vec<usize> = (0..len).map(|i| code / 7usize.pow(i) % 7).collect();
                let mut distinct = w.clone();
                distinct.sort();
                distinct.dedup();
                let m = PeriodicOrbitMeasure { word: w.clone() };
                if distinct.len() == w.len() && m.is_cycle_of(&g) {
                    brute.insert(pm(&w));
                }
            }
        }
        let got: std::collections::BTreeSet<_> = e.measures.iter().cloned().collect();
        assert_eq!(got.len(), e.len());
        assert_eq!(got, brute);
    }

    #[test]
    fn sigmund_examples() {
        let sys = FiniteMetricSystem::circle_doubling(2).unwrap();
        let g = build_chain_graph(&sys, 1.0).unwrap();
        let (u, v) = (pm(&[0]), pm(&[1]));
        let target = [(u.clone(), 0.5), (v.clone(), 0.5)];
        for m in [2usize, 4, 8] {
            let s = sigmund_approximation(&target, &g, 2 * m).unwrap();
            let mut expect = vec![0; m];
            expect.extend(vec![1; m]);
            assert_eq!(s, pm(&expect));
            let tc = MixtureMeasure::new(target.to_vec()).unwrap().cylinders(2).unwrap();
            let sc = s.cylinders(2).unwrap();
            let d = discrete(2);
            assert!(weakstar_proxy(&sc, &tc, &d, 1).unwrap() < 1e-12);
            let two = weakstar_proxy(&sc, &tc, &d, 2).unwrap();
            assert!(two > 0.0 && two <= 1.0 / (4.0 * m as f64) + 1e-12);
        }
        assert_eq!(sigmund_approximation(&[(u.clone(), 1.0)], &g, 3).unwrap(), u);
        assert!(matches!(
            sigmund_approximation(&[(u, 0.9), (v, 0.1)], &g, 2),
            Err(Error::DegenerateWeights { component: 1, scale: 2 })
        ));
    }

    #[test]
    fn sigmund_output_is_a_cyclic_chain() {
        let sys = FiniteMetricSystem::circle_doubling(4).unwrap();
        let g = build_chain_graph(&sys, 0.25).unwrap();
        let target = [(pm(&[0]), 0.5), (pm(&[1]), 0.5)];
        let tc = MixtureMeasure::new(target.to_vec()).unwrap().cylinders(3).unwrap();
        let mut last = f64::INFINITY;
        for l in [8, 16, 32] {
            let s = sigmund_approximation(&target, &g, l).unwrap();
            assert!(s.is_cycle_of(&g));
            let d = weakstar_proxy(&s.cylinders(3).unwrap(), &tc, sys.metric(), 3).unwrap();
            assert!(d < last);
            last = d;
        }
    }

    #[test]
    fn weakstar_examples() {
        let cost = DistanceMatrix::circle_grid(4);
        let a = pm(&[0, 1, 3]).cylinders(3).unwrap();
        assert_eq!(weakstar_proxy(&a, &a, &cost, 3).unwrap(), 0.0);
        let (u, v) = (pm(&[0]).cylinders(4).unwrap(), pm(&[1]).cylinders(4).unwrap());
        for m in 1..=4 {
            let got = weakstar_proxy(&u, &v, &cost, m).unwrap();
            let expect = (1.0 - 0.5f64.powi(m as i32)) * cost.get(0, 1);
            assert!((got - expect).abs() < 1e-12);
        }
        assert!(matches!(weakstar_proxy(&a, &u, &cost, 4), Err(Error::DepthMismatch { requested: 4, available: 3 })));
    }

    #[test]
    fn weakstar_dominated_by_rho_bar_at_depth_three() {
        // Level-w block cost is at most min(1, w·ρ̄) under the optimal phase
        // joining, and Σ_{w≤3} 2^{−w} min(1, w r) ≤ r + 1/8 on [0, 1].
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let cost = DistanceMatrix::circle_grid(5);
        for _ in 0..300 {
            let a = pm(&(0..rng.gen_range(1..7)).map(|_| rng.gen_range(0..5)).collect::<Vec<_>>());
            let b = pm(&(0..rng.gen_range(1..7)).map(|_| rng.gen_range(0..5)).collect::<Vec<_>>());
            let r = rho_bar_periodic(&a, &b, &cost).value;
            for m in 1..=3 {
                let p = weakstar_proxy(&a.cylinders(m).unwrap(), &b.cylinders(m).unwrap(), &cost, m).unwrap();
                assert!(p <= r + 0.5f64.powi(m as i32) + 1e-9);
            }
        }
    }

    #[test]
    fn weakstar_exceeds_rho_bar_bound_at_depth_four() {
        let cost = discrete(2);
        let (a, b) = (pm(&[0, 0, 0, 0, 1]), pm(&[0]));
        let r = rho_bar_periodic(&a, &b, &cost).value;
        let p = weakstar_proxy(&a.cylinders(4).unwrap(), &b.cylinders(4).unwrap(), &cost, 4).unwrap();
        assert!((r - 0.2).abs() < 1e-12);
        assert!((p - 0.325).abs() < 1e-12);
        assert!(p > r + 1.0 / 16.0);
    }

    #[test]
    fn measure_files_parse() {
        let sys = FiniteMetricSystem::circle_doubling(4).unwrap();
        let f: MeasureFile = serde_json::from_str(r#"{"type": "periodic", "word": [1, 0]}"#).unwrap();
        assert!(matches!(f.into_measure(&sys).unwrap(), AnyMeasure::Periodic(m) if m.word() == [0, 1]));
        let f: MeasureFile =
            serde_json::from_str(r#"{"type": "markov", "P": [[0.5, 0.5], [1, 0]], "support": [0, 3]}"#).unwrap();
        assert!(matches!(f.into_measure(&sys).unwrap(), AnyMeasure::Markov(_)));
        let f: MeasureFile = serde_json::from_str(r#"{"type": "periodic", "word": [9]}"#).unwrap();
        assert!(f.into_measure(&sys).is_err());
    }
}
