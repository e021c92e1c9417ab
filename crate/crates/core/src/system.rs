//! Finite metric dynamical systems, trajectories in `X^ℤ` and the product
//! metric π on them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::*;
use crate::{le_tol, lt_tol, TOL};

/// Dense square matrix of pairwise distances, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::invalid(format!(
                    "distance matrix row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(DistanceMatrix { n, data })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        DistanceMatrix { n, data }
    }

    /// `n` equally spaced points on the unit circle with arc-length distance.
    pub fn circle_grid(n: usize) -> Self {
        Self::from_fn(n, |i, j| {
            let d = i.abs_diff(j);
            d.min(n - d) as f64 / n as f64
        })
    }

    /// `n` equally spaced points on `[0, 1]` with the absolute-value distance.
    pub fn line_grid(n: usize) -> Self {
        let scale = if n > 1 { (n - 1) as f64 } else { 1.0 };
        Self::from_fn(n, |i, j| i.abs_diff(j) as f64 / scale)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn max_entry(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    /// Checks the metric axioms, returning the first violating triple.
    pub fn check_metric(&self) -> Result<()> {
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                let d = self.get(i, j);
                if !d.is_finite() || d < 0.0 {
                    return Err(Error::NotAMetric { reason: "negative or non-finite entry", i, j, k: j });
                }
                if i == j && d.abs() > TOL {
                    return Err(Error::NotAMetric { reason: "nonzero diagonal", i, j, k: j });
                }
                if (d - self.get(j, i)).abs() > TOL {
                    return Err(Error::NotAMetric { reason: "asymmetric", i, j, k: i });
                }
            }
        }
        let violations: Vec<Option<(usize, usize, usize)>> = (0..n)
            .into_par_iter()
            .map(|i| {
                for j in 0..n {
                    let dij = self.get(i, j);
                    for k in 0..n {
                        if !le_tol(self.get(i, k), dij + self.get(j, k)) {
                            return Some((i, j, k));
                        }
                    }
                }
                None
            })
            .collect();
        match violations.into_iter().flatten().next() {
            Some((i, j, k)) => Err(Error::NotAMetric { reason: "triangle inequality", i, j, k }),
            None => Ok(()),
        }
    }
}

/// Validates `raw` as a metric and clamps it to `min(1, raw)`.
pub fn normalize_metric(raw: &DistanceMatrix) -> Result<DistanceMatrix> {
    raw.check_metric()?;
    Ok(DistanceMatrix {
        n: raw.n,
        data: raw.data.iter().map(|&d| d.min(1.0)).collect(),
    })
}

/// A finite metric space of diameter at most one together with a total self-map.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteMetricSystem {
    labels: Vec<String>,
    dist: DistanceMatrix,
    map: Vec<usize>,
    clamped: bool,
}

impl FiniteMetricSystem {
    /// Builds a system from a raw metric, normalizing it first. Empty `labels`
    /// means "use the ids".
    pub fn new(labels: Vec<String>, raw: DistanceMatrix, map: Vec<usize>) -> Result<Self> {
        let n = raw.len();
        if n == 0 {
            return Err(Error::invalid("a system needs at least one point"));
        }
        if map.len() != n {
            return Err(Error::invalid(format!("map has {} entries for {n} points", map.len())));
        }
        if let Some((u, &v)) = map.iter().enumerate().find(|(_, &v)| v >= n) {
            return Err(Error::invalid(format!("map sends {u} to unknown point {v}")));
        }
        let labels = if labels.is_empty() {
            (0..n).map(|i| i.to_string()).collect()
        } else if labels.len() == n {
            labels
        } else {
            return Err(Error::invalid(format!("{} labels for {n} points", labels.len())));
        };
        let clamped = raw.max_entry() > 1.0;
        let dist = normalize_metric(&raw)?;
        Ok(FiniteMetricSystem { labels, dist, map, clamped })
    }

    /// Grid of `n` points on the circle with `T(x) = 2x mod 1`.
    pub fn circle_doubling(n: usize) -> Result<Self> {
        let labels = (0..n).map(|i| format!("{i}/{n}")).collect();
        let map = (0..n).map(|i| (2 * i) % n.max(1)).collect();
        Self::new(labels, DistanceMatrix::circle_grid(n), map)
    }

    /// Grid of `n` points on the circle rotated by `k` grid steps.
    pub fn circle_rotation(n: usize, k: usize) -> Result<Self> {
        let labels = (0..n).map(|i| format!("{i}/{n}")).collect();
        let map = (0..n).map(|i| (i + k) % n.max(1)).collect();
        Self::new(labels, DistanceMatrix::circle_grid(n), map)
    }

    /// Random points in the unit square (Euclidean distance, clamped at one)
    /// with a uniformly random self-map.
    pub fn random_metric(n: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen(), rng.gen())).collect();
        let map = (0..n).map(|_| rng.gen_range(0..n.max(1))).collect();
        let raw = DistanceMatrix::from_fn(n, |i, j| {
            if i == j {
                0.0
            } else {
                let (dx, dy) = (pts[i].0 - pts[j].0, pts[i].1 - pts[j].1);
                (dx * dx + dy * dy).sqrt()
            }
        });
        Self::new(Vec::new(), raw, map)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    #[inline]
    pub fn dist(&self, u: usize, v: usize) -> f64 {
        self.dist.get(u, v)
    }

    #[inline]
    pub fn image(&self, u: usize) -> usize {
        self.map[u]
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }

    pub fn metric(&self) -> &DistanceMatrix {
        &self.dist
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, u: usize) -> &str {
        &self.labels[u]
    }

    /// Whether loading clamped any raw distance down to one.
    pub fn was_clamped(&self) -> bool {
        self.clamped
    }

    /// Orbit segment `x, T(x), …` of `len` points starting at coordinate 0.
    pub fn orbit(&self, start: usize, len: usize) -> FiniteTrajectory {
        let mut entries = Vec::with_capacity(len);
        let mut u = start;
        for _ in 0..len {
            entries.push(u);
            u = self.map[u];
        }
        FiniteTrajectory { origin: 0, entries }
    }
}

/// A finite window `x_origin, …, x_{origin+len−1}` of an element of `X^ℤ`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiniteTrajectory {
    origin: i64,
    entries: Vec<usize>,
}

impl FiniteTrajectory {
    pub fn new(origin: i64, entries: Vec<usize>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("trajectory must be non-empty"));
        }
        Ok(FiniteTrajectory { origin, entries })
    }

    /// Trajectory whose first entry sits at coordinate 0.
    pub fn from_zero(entries: Vec<usize>) -> Result<Self> {
        Self::new(0, entries)
    }

    pub fn origin(&self) -> i64 {
        self.origin
    }

    /// Last covered coordinate.
    pub fn end(&self) -> i64 {
        self.origin + self.entries.len() as i64 - 1
    }

    pub fn entries(&self) -> &[usize] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    #[inline]
    pub fn get(&self, k: i64) -> Option<usize> {
        let idx = k - self.origin;
        if idx < 0 {
            return None;
        }
        self.entries.get(idx as usize).copied()
    }

    pub fn covers(&self, from: i64, to: i64) -> bool {
        from >= self.origin && to <= self.end()
    }

    pub fn require(&self, from: i64, to: i64) -> Result<()> {
        if self.covers(from, to) {
            Ok(())
        } else {
            Err(Error::InsufficientWindow {
                need_from: from,
                need_to: to,
                have_from: self.origin,
                have_to: self.end(),
            })
        }
    }

    /// The shifted sequence `S^j(x)`, i.e. `S^j(x)_k = x_{k+j}`.
    pub fn shifted(&self, j: i64) -> Self {
        FiniteTrajectory { origin: self.origin - j, entries: self.entries.clone() }
    }

    /// Restriction to coordinates `from..=to`.
    pub fn window(&self, from: i64, to: i64) -> Result<Self> {
        self.require(from, to)?;
        let s = (from - self.origin) as usize;
        let e = (to - self.origin) as usize;
        Ok(FiniteTrajectory { origin: from, entries: self.entries[s..=e].to_vec() })
    }

    pub fn validate_for(&self, sys: &FiniteMetricSystem) -> Result<()> {
        match self.entries.iter().find(|&&u| u >= sys.len()) {
            Some(u) => Err(Error::invalid(format!("trajectory mentions unknown point {u}"))),
            None => Ok(()),
        }
    }
}

/// The orbit segment of `source` over `[a, b)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalSegment {
    pub a: i64,
    pub b: i64,
    pub source: FiniteTrajectory,
}

impl IntervalSegment {
    pub fn new(a: i64, b: i64, source: FiniteTrajectory) -> Result<Self> {
        if a >= b {
            return Err(Error::invalid(format!("segment needs a < b, got [{a}, {b})")));
        }
        source.require(a, b - 1)?;
        Ok(IntervalSegment { a, b, source })
    }

    pub fn len(&self) -> usize {
        (self.b - self.a) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Value of `π` over a finite window. When the window does not decide the
/// supremum, `value` is the tail bound `1/(K+2)` and `exact` is false.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiDistance {
    pub value: f64,
    pub exact: bool,
}

/// Tail bound of `π` at radius `K`: every unseen term is at most `1/(K+2)`.
#[inline]
pub fn pi_tail_bound(radius: usize) -> f64 {
    1.0 / (radius as f64 + 2.0)
}

pub(crate) fn pi_truncated_at(
    sys: &FiniteMetricSystem,
    x: &FiniteTrajectory,
    y: &FiniteTrajectory,
    center: i64,
    radius: usize,
) -> Result<PiDistance> {
    let r = radius as i64;
    x.require(center - r, center + r)?;
    y.require(center - r, center + r)?;
    let mut best = 0.0f64;
    for k in -r..=r {
        let xk = x.get(center + k).unwrap();
        let yk = y.get(center + k).unwrap();
        let term = sys.dist(xk, yk).min(1.0 / (k.unsigned_abs() as f64 + 1.0));
        best = best.max(term);
    }
    let tail = pi_tail_bound(radius);
    Ok(if best > tail {
        PiDistance { value: best, exact: true }
    } else {
        PiDistance { value: tail, exact: false }
    })
}

/// `π(x, y) = sup_k min(ρ(x_k, y_k), 1/(|k|+1))` evaluated over `|k| ≤ radius`.
pub fn pi_distance(
    sys: &FiniteMetricSystem,
    x: &FiniteTrajectory,
    y: &FiniteTrajectory,
    radius: usize,
) -> Result<PiDistance> {
    pi_truncated_at(sys, x, y, 0, radius)
}

/// Largest `|k|` with `|k| + 1 ≤ max(1, 1/eps)`.
pub fn window_radius(eps: f64) -> usize {
    let bound = (1.0 / eps).max(1.0);
    ((bound + TOL).floor() as usize).saturating_sub(1)
}

pub(crate) fn window_check_at(
    sys: &FiniteMetricSystem,
    eps: f64,
    x: &FiniteTrajectory,
    y: &FiniteTrajectory,
    center: i64,
) -> Result<std::result::Result<(), i64>> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::invalid(format!("eps must lie in (0, 1], got {eps}")));
    }
    let r = window_radius(eps) as i64;
    x.require(center - r, center + r)?;
    y.require(center - r, center + r)?;
    for k in -r..=r {
        let d = sys.dist(x.get(center + k).unwrap(), y.get(center + k).unwrap());
        if !lt_tol(d, eps) {
            return Ok(Err(center + k));
        }
    }
    Ok(Ok(()))
}

/// Checks `ρ(x_k, y_k) < eps` for every `k` with `|k| + 1 ≤ max(1, 1/eps)`,
/// which is equivalent to `π(x, y) < eps`.
pub fn window_check(
    sys: &FiniteMetricSystem,
    eps: f64,
    x: &FiniteTrajectory,
    y: &FiniteTrajectory,
) -> Result<bool> {
    Ok(window_check_at(sys, eps, x, y, 0)?.is_ok())
}

pub const DEFAULT_PRODUCT_CAP: usize = 1 << 16;

/// Product system with the max metric and the componentwise map. Point
/// `(a, b)` gets id `a * |B| + b`.
pub fn product_system(
    a: &FiniteMetricSystem,
    b: &FiniteMetricSystem,
    cap: usize,
) -> Result<FiniteMetricSystem> {
    let (na, nb) = (a.len(), b.len());
    let n = na.checked_mul(nb).filter(|&n| n <= cap).ok_or(Error::SizeOverflow {
        left: na,
        right: nb,
        cap,
    })?;
    let dist = DistanceMatrix::from_fn(n, |p, q| {
        a.dist(p / nb, q / nb).max(b.dist(p % nb, q % nb))
    });
    let map = (0..n).map(|p| a.image(p / nb) * nb + b.image(p % nb)).collect();
    let labels = (0..n)
        .map(|p| format!("({},{})", a.label(p / nb), b.label(p % nb)))
        .collect();
    FiniteMetricSystem::new(labels, dist, map)
}

/// The eventual image `⋂_m T^m(X)` and the system restricted to it.
#[derive(Clone, Debug)]
pub struct SurjectiveCore {
    /// Ids of the core in the original system, increasing.
    pub ids: Vec<usize>,
    /// The restricted system; point `i` corresponds to `ids[i]`.
    pub system: FiniteMetricSystem,
}

pub fn surjective_core(sys: &FiniteMetricSystem) -> SurjectiveCore {
    let n = sys.len();
    let mut current = vec![true; n];
    loop {
        let mut next = vec![false; n];
        for u in (0..n).filter(|&u| current[u]) {
            next[sys.image(u)] = true;
        }
        if next == current {
            break;
        }
        current = next;
    }
    let ids: Vec<usize> = (0..n).filter(|&u| current[u]).collect();
    let mut index = vec![usize::MAX; n];
    for (i, &u) in ids.iter().enumerate() {
        index[u] = i;
    }
    let dist = DistanceMatrix::from_fn(ids.len(), |i, j| sys.dist(ids[i], ids[j]));
    let map = ids.iter().map(|&u| index[sys.image(u)]).collect();
    let labels = ids.iter().map(|&u| sys.label(u).to_string()).collect();
    let system = FiniteMetricSystem::new(labels, dist, map)
        .expect("restriction of a valid system is valid");
    SurjectiveCore { ids, system }
}
