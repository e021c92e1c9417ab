//! Periodic specification in the chain subshift: gluing spaced orbit segments
//! into one periodic δ-chain that traces all of them.

use serde::{Deserialize, Serialize};

use crate::chain::{finite_chain, mixing_certificate, ChainGraph, MixingCertificate};
use crate::error::{Error, Result};
use crate::system::{window_check_at, FiniteTrajectory, IntervalSegment};
use crate::TOL;

/// Least positive `N` with `1/N ≤ eps`.
pub fn tracing_radius(eps: f64) -> Result<usize> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::invalid(format!("eps must lie in (0, 1], got {eps}")));
    }
    let mut n = (1.0 / eps).ceil().max(1.0) as usize;
    while n > 1 && 1.0 / (n - 1) as f64 <= eps + TOL {
        n -= 1;
    }
    Ok(n)
}

/// `(N, k(ε))` with `N = ⌈1/ε⌉` and `k(ε) = 2N − 2 + M`.
pub fn spacing_constant(eps: f64, cert: &MixingCertificate) -> Result<(usize, usize)> {
    let m = cert.require_mixing()?;
    let n = tracing_radius(eps)?;
    Ok((n, 2 * n - 2 + m))
}

/// Orbit segments `[a_i, b_i)` of chain elements, each supplied with enough
/// surrounding context for tracing.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpacedSpecification {
    pub segments: Vec<IntervalSegment>,
}

impl SpacedSpecification {
    pub fn new(segments: Vec<IntervalSegment>) -> Self {
        SpacedSpecification { segments }
    }

    /// Smallest gap `a_i − b_{i−1}`, if there are at least two segments.
    pub fn min_spacing(&self) -> Option<i64> {
        self.segments.windows(2).map(|w| w[1].a - w[0].b).min()
    }

    /// Checks ordering, spacing `≥ k`, margins `[a_i − N + 1, b_i + N − 2]` and
    /// that every margin window is a chain of `g`.
    pub fn validate(&self, g: &ChainGraph<'_>, n: usize, k: usize) -> Result<()> {
        let first = self.segments.first().ok_or_else(|| Error::invalid("no segments"))?;
        if first.a != 0 {
            return Err(Error::invalid(format!("first segment must start at 0, got {}", first.a)));
        }
        let n = n as i64;
        for (i, seg) in self.segments.iter().enumerate() {
            if seg.a >= seg.b {
                return Err(Error::invalid(format!("segment {i} is empty")));
            }
            if i > 0 {
                let gap = seg.a - self.segments[i - 1].b;
                if gap < k as i64 {
                    return Err(Error::InsufficientSpacing { segment: i, gap, required: k as i64 });
                }
            }
            let (from, to) = (seg.a - n + 1, seg.b + n - 2);
            if !seg.source.covers(from, to) {
                return Err(Error::InsufficientMargin { segment: i, from, to });
            }
            for c in from..=to {
                let u = seg.source.get(c).unwrap();
                if u >= g.len() {
                    return Err(Error::invalid(format!("segment {i} mentions unknown point {u}")));
                }
                if c < to && !g.has_edge(u, seg.source.get(c + 1).unwrap()) {
                    return Err(Error::NotAChain { segment: i, coordinate: c });
                }
            }
        }
        Ok(())
    }
}

/// One period of a periodic sequence `y` with `y_t = word[(t + origin_offset) mod period]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodicChain {
    pub word: Vec<usize>,
    pub period: usize,
    pub origin_offset: i64,
}

impl PeriodicChain {
    #[inline]
    pub fn at(&self, t: i64) -> usize {
        let p = self.word.len() as i64;
        self.word[(t + self.origin_offset).rem_euclid(p) as usize]
    }

    /// Coordinates `from..=to` of the periodic sequence.
    pub fn window(&self, from: i64, to: i64) -> FiniteTrajectory {
        FiniteTrajectory::new(from, (from..=to).map(|t| self.at(t)).collect())
            .expect("non-empty window")
    }

    /// First word position `i` whose step `word[i] → word[i+1 mod p]` is not an edge.
    pub fn first_break(&self, g: &ChainGraph<'_>) -> Option<usize> {
        let p = self.word.len();
        (0..p).find(|&i| {
            let (u, v) = (self.word[i], self.word[(i + 1) % p]);
            u >= g.len() || v >= g.len() || !g.has_edge(u, v)
        })
    }

    pub fn is_cyclic_chain(&self, g: &ChainGraph<'_>) -> bool {
        !self.word.is_empty() && self.first_break(g).is_none()
    }

    /// Least `q` such that the word is invariant under rotation by `q`.
    pub fn minimal_period(&self) -> usize {
        let p = self.word.len();
        (1..=p)
            .find(|&q| p % q == 0 && (0..p).all(|i| self.word[i] == self.word[(i + q) % p]))
            .unwrap_or(p)
    }
}

/// Builds a periodic δ-chain that coincides with every segment on its margin
/// window `[a_i − N + 1, b_i + N − 2]` and closes up with period `b_n + k(ε)`.
///
/// Consecutive margin windows are joined by the lexicographically least chain
/// of the exact length the coordinates demand, `a_{i+1} − b_i − 2N + 3`, which
/// is at least `M + 1` because the spacing is at least `k(ε)`.
pub fn trace_specification(
    spec: &SpacedSpecification,
    g: &ChainGraph<'_>,
    eps: f64,
) -> Result<PeriodicChain> {
    let cert = mixing_certificate(g);
    let (n, k) = spacing_constant(eps, &cert)?;
    spec.validate(g, n, k)?;
    let n = n as i64;
    let segs = &spec.segments;
    let period = segs.last().unwrap().b + k as i64;

    let mut word = Vec::with_capacity(period as usize);
    for (i, seg) in segs.iter().enumerate() {
        let (from, to) = (seg.a - n + 1, seg.b + n - 2);
        word.extend((from..=to).map(|c| seg.source.get(c).unwrap()));
        let (next_from, next_first) = match segs.get(i + 1) {
            Some(next) => (next.a - n + 1, next.source.get(next.a - n + 1).unwrap()),
            None => (period - n + 1, segs[0].source.get(1 - n).unwrap()),
        };
        let len = (next_from - to) as usize;
        let bridge = finite_chain(g, seg.source.get(to).unwrap(), next_first, len)?;
        word.extend_from_slice(&bridge[1..len]);
    }
    debug_assert_eq!(word.len() as i64, period);
    Ok(PeriodicChain { period: word.len(), word, origin_offset: n - 1 })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowFailure {
    pub segment: usize,
    pub shift: i64,
    pub coordinate: i64,
}

/// Outcome of an independent re-check of a traced specification.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceReport {
    pub ok: bool,
    /// First word position whose cyclic step is not an edge.
    pub chain_break: Option<usize>,
    pub period_consistent: bool,
    /// First segment, shift `j` and coordinate where `π(S^j y, S^j x^{(i)}) < ε` fails.
    pub window_failure: Option<WindowFailure>,
    /// Segment whose source lacks the context needed for the check.
    pub missing_context: Option<usize>,
}

/// Re-checks that `y` is a cyclic chain of `g` and that for every segment and
/// `j ∈ [a_i, b_i)` the windowed test certifies `π(S^j y, S^j x^{(i)}) < eps`.
pub fn verify_trace(
    y: &PeriodicChain,
    spec: &SpacedSpecification,
    g: &ChainGraph<'_>,
    eps: f64,
) -> Result<TraceReport> {
    let sys = g.system();
    let chain_break = if y.word.is_empty() { Some(0) } else { y.first_break(g) };
    let period_consistent =
        !y.word.is_empty() && y.period == y.word.len() && y.period % y.minimal_period() == 0;
    let mut window_failure = None;
    let mut missing_context = None;
    if !y.word.is_empty() {
        let r = crate::system::window_radius(eps) as i64;
        'segments: for (i, seg) in spec.segments.iter().enumerate() {
            let (from, to) = (seg.a - r, seg.b - 1 + r);
            if !seg.source.covers(from, to) {
                missing_context = Some(i);
                break;
            }
            let yw = y.window(from, to);
            for j in seg.a..seg.b {
                if let Err(coordinate) = window_check_at(sys, eps, &yw, &seg.source, j)? {
                    window_failure = Some(WindowFailure { segment: i, shift: j, coordinate });
                    break 'segments;
                }
            }
        }
    }
    Ok(TraceReport {
        ok: chain_break.is_none()
            && period_consistent
            && window_failure.is_none()
            && missing_context.is_none(),
        chain_break,
        period_consistent,
        window_failure,
        missing_context,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::build_chain_graph;
    use crate::system::FiniteMetricSystem;

    #[test]
    fn spacing_constant_examples() {
        let cert = |m| MixingCertificate {
            strongly_connected: true,
            components: 1,
            period: 1,
            mixing_constant: Some(m),
            minimality_witness: None,
        };
        assert_eq!(spacing_constant(0.5, &cert(2)).unwrap(), (2, 4));
        assert_eq!(spacing_constant(1.0, &cert(1)).unwrap(), (1, 1));
        assert_eq!(spacing_constant(1.0 / 3.0, &cert(5)).unwrap(), (3, 9));
        assert_eq!(tracing_radius(0.3).unwrap(), 4);
        let not_mixing = MixingCertificate { mixing_constant: None, period: 2, ..cert(1) };
        assert!(matches!(spacing_constant(0.5, &not_mixing), Err(Error::NotMixing { .. })));
    }

    fn seg(a: i64, b: i64, origin: i64, entries: Vec<usize>) -> IntervalSegment {
        IntervalSegment::new(a, b, FiniteTrajectory::new(origin, entries).unwrap()).unwrap()
    }

    #[test]
    fn fixed_point_traces_to_itself() {
        let sys = FiniteMetricSystem::circle_doubling(4).unwrap();
        let g = build_chain_graph(&sys, 0.25).unwrap();
        // eps = 1/2: N = 2, k = 4
        let spec = SpacedSpecification::new(vec![seg(0, 3, -1, vec![0; 5])]);
        let y = trace_specification(&spec, &g, 0.5).unwrap();
        assert_eq!(y.period, 3 + 4);
        assert!(y.word.iter().all(|&u| u == 0));
        assert!(verify_trace(&y, &spec, &g, 0.5).unwrap().ok);
    }

    #[test]
    fn two_segments_on_doubling_grid_four() {
        let sys = FiniteMetricSystem::circle_doubling(4).unwrap();
        let g = build_chain_graph(&sys, 0.25).unwrap();
        // chains 1 1 2 3 1 and 3 3 2 0 0 around [0, 3) and [7, 10)
        let s1 = seg(0, 3, -1, vec![1, 1, 2, 3, 1]);
        let s2 = seg(7, 10, 6, vec![3, 3, 2, 0, 0]);
        let spec = SpacedSpecification::new(vec![s1.clone(), s2.clone()]);
        let y = trace_specification(&spec, &g, 0.5).unwrap();
        assert_eq!(y.period, 10 + 4);
        assert!(y.is_cyclic_chain(&g));
        for s in [&s1, &s2] {
            for c in s.a - 1..=s.b {
                assert_eq!(y.at(c), s.source.get(c).unwrap());
            }
        }
        assert_eq!(y.at(0), 1);
        assert!(verify_trace(&y, &spec, &g, 0.5).unwrap().ok);

        // spacing k − 1 is rejected
        let close = SpacedSpecification::new(vec![s1.clone(), seg(6, 9, 5, vec![3, 3, 2, 0, 0])]);
        assert!(matches!(
            trace_specification(&close, &g, 0.5),
            Err(Error::InsufficientSpacing { segment: 1, gap: 3, required: 4 })
        ));
        // missing margin
        let thin = SpacedSpecification::new(vec![seg(0, 3, 0, vec![1, 2, 3, 1])]);
        assert!(matches!(trace_specification(&thin, &g, 0.5), Err(Error::InsufficientMargin { .. })));
        // not a chain: 0 -> 2 is not an edge
        let broken = SpacedSpecification::new(vec![seg(0, 3, -1, vec![0, 2, 2, 3, 1])]);
        assert!(matches!(trace_specification(&broken, &g, 0.5), Err(Error::NotAChain { .. })));
    }

    #[test]
    fn longer_spacing_is_supported() {
        let sys = FiniteMetricSystem::circle_doubling(4).unwrap();
        let g = build_chain_graph(&sys, 0.25).unwrap();
        let s1 = seg(0, 2, -1, vec![1, 2, 3, 1]);
        let s2 = seg(9, 11, 8, vec![2, 0, 0, 1]);
        let spec = SpacedSpecification::new(vec![s1, s2]);
        let y = trace_specification(&spec, &g, 0.5).unwrap();
        assert_eq!(y.period, 11 + 4);
        assert!(verify_trace(&y, &spec, &g, 0.5).unwrap().ok);
    }

    #[test]
    fn perturbations() {
        let sys = FiniteMetricSystem::circle_doubling(4).unwrap();
        let g = build_chain_graph(&sys, 0.25).unwrap();
        let s1 = seg(0, 3, -1, vec![1, 1, 2, 3, 1]);
        let s2 = seg(7, 10, 6, vec![3, 3, 2, 0, 0]);
        let spec = SpacedSpecification::new(vec![s1, s2]);
        let y = trace_specification(&spec, &g, 0.5).unwrap();

        // coordinate 1 holds 2 (= 1/2); 0 is at distance 1/2 ≥ eps
        let mut bad = y.clone();
        let pos = (1 + bad.origin_offset) as usize;
        assert_eq!(bad.word[pos], 2);
        bad.word[pos] = 0;
        let r = verify_trace(&bad, &spec, &g, 0.5).unwrap();
        assert!(!r.ok);
        assert_eq!(r.window_failure, Some(WindowFailure { segment: 0, shift: 0, coordinate: 1 }));

        // a gap coordinate (between 3 and 6) may move to any vertex that keeps the chain
        let mut moved = false;
        for t in 4..=5i64 {
            let pos = (t + y.origin_offset) as usize;
            let (prev, next) = (y.word[pos - 1], y.word[pos + 1]);
            for w in 0..4 {
                if w != y.word[pos] && g.has_edge(prev, w) && g.has_edge(w, next) {
                    let mut alt = y.clone();
                    alt.word[pos] = w;
                    assert!(verify_trace(&alt, &spec, &g, 0.5).unwrap().ok);
                    moved = true;
                }
            }
        }
        assert!(moved);
    }
}
