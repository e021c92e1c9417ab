//! End-to-end run over the chain family `δ = 1, 1/2, …, 1/n_max`: mixing
//! certificates and specification constants per level, ergodic sets and their
//! Hausdorff distances across levels, and the density demonstration.
//!
//! The finest level stands in for the system itself. Trends across levels
//! are measured and fitted, never asserted.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{chain_family, mixing_certificate, ChainGraph, MixingCertificate};
use crate::error::{Error, Result};
use crate::measures::{
    ergodic_measures_of_graph, hausdorff_from_matrix, pairwise, pi_bar_periodic,
    sigmund_approximation, weakstar_proxy, ErgodicSet, MixtureMeasure, PeriodicOrbitMeasure,
};
use crate::par::*;
use crate::shadowing::besicovitch_pi;
use crate::specification::spacing_constant;
use crate::system::{pi_tail_bound, FiniteMetricSystem};
use crate::lt_tol;

mod config;
mod report;

pub use config::{load_config, parse_config, Generator, PipelineConfig, SystemSource, TargetComponent};
pub use report::{emit_report, load_report, strip_timestamp, EmittedFiles};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpacingEntry {
    pub eps: f64,
    /// Tracing radius `N` with `1/N ≤ ε`.
    pub radius: usize,
    /// Spacing constant `k(ε) = 2N − 2 + M`.
    pub k: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub n: usize,
    pub delta: f64,
    pub edge_count: usize,
    pub complete: bool,
    pub certificate: MixingCertificate,
    /// Empty when the level is not mixing.
    pub spacing: Vec<SpacingEntry>,
    pub ergodic_count: usize,
    pub ergodic_truncated: bool,
    /// Number of ergodic measures of each period `1..=max_period`.
    pub ergodic_by_period: Vec<usize>,
}

/// Distances between the ergodic sets of a coarse level `n` and a finer
/// level `m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossLevel {
    pub coarse: usize,
    pub fine: usize,
    /// Hausdorff distance under π̄ between the (sampled) ergodic sets.
    pub hausdorff: f64,
    /// Every π̄ value is an upper bound within this of the truth.
    pub error_bar: f64,
    pub coarse_sample: usize,
    pub fine_sample: usize,
    pub sampled: bool,
    /// The same Hausdorff construction with π̄ replaced by the Besicovitch π
    /// average at canonical alignment, which dominates π̄ pairwise.
    pub besicovitch_bound: f64,
    pub bound_holds: bool,
    /// Hausdorff distance from random mixtures (plus the ergodic measures) of
    /// one level to the convex hull of the other, both directions.
    pub full_hausdorff: f64,
    pub full_minus_ergodic: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendPoint {
    pub n: usize,
    pub distance_to_finest: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trend {
    pub points: Vec<TrendPoint>,
    pub non_increasing: bool,
    /// Least-squares exponent `b` in `distance ≈ a·n^b` over positive points.
    pub fitted_exponent: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityRow {
    pub scale: usize,
    pub period: usize,
    pub weakstar: f64,
    /// π̄ from the approximant to the target (upper bound).
    pub pi_bar: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub level: usize,
    pub target: Vec<TargetComponent>,
    pub mixing_constant: usize,
    pub rows: Vec<DensityRow>,
    /// Scales rejected because a weight rounded to zero blocks.
    pub degenerate_scales: Vec<usize>,
    pub threshold: f64,
    /// First scale whose weak* proxy is below `threshold` by more than the
    /// comparison tolerance.
    pub l_star: Option<usize>,
    pub non_increasing_after_l_star: bool,
    /// Least-squares `c` in `weakstar ≈ c / L`.
    pub fitted_c: Option<f64>,
    pub pi_error_bar: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemSummary {
    pub points: usize,
    pub clamped: bool,
    pub critical_deltas: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageError {
    pub stage: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub version: String,
    pub config_sha256: String,
    /// Wall-clock time of the run; the only field that varies between runs.
    pub generated_at: String,
    pub config: PipelineConfig,
    pub system: SystemSummary,
    pub levels: Vec<LevelReport>,
    pub cross_levels: Vec<CrossLevel>,
    pub trend: Trend,
    pub density: Option<DensityReport>,
    pub errors: Vec<StageError>,
}

impl PipelineReport {
    pub fn level(&self, n: usize) -> Option<&LevelReport> {
        self.levels.iter().find(|l| l.n == n)
    }
}

struct Level<'s> {
    graph: ChainGraph<'s>,
    cert: MixingCertificate,
    ergodic: Result<ErgodicSet>,
}

fn level_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Deterministic sample of at most `k` measures, kept in enumeration order.
fn sample_measures(set: &ErgodicSet, k: usize, seed: u64, stream: u64) -> Vec<PeriodicOrbitMeasure> {
    if set.len() <= k {
        return set.measures.clone();
    }
    let mut idx = sample(&mut level_rng(seed, stream), set.len(), k).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| set.measures[i].clone()).collect()
}

/// Random mixtures of two or three members of `set`.
fn sample_mixtures(set: &[PeriodicOrbitMeasure], count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<(usize, f64)>> {
    if set.len() < 2 {
        return Vec::new();
    }
    (0..count)
        .map(|_| {
            let parts = rng.gen_range(2..=3.min(set.len()));
            let idx = sample(rng, set.len(), parts).into_vec();
            let raw: Vec<f64> = (0..parts).map(|_| rng.gen_range(0.05..1.0)).collect();
            let total: f64 = raw.iter().sum();
            idx.into_iter().zip(raw).map(|(i, w)| (i, w / total)).collect()
        })
        .collect()
}

/// Directed distance from each mixture to the convex hull of the column set.
///
/// For a mixture `Σ w_i μ_i` of distinct periodic orbits and a target
/// `Σ v_j ν_j`, π̄ is the transport cost between the weight vectors. Leaving
/// `v` free, the best target sends each `μ_i` to its nearest `ν_j`, so the
/// distance to the hull is `Σ w_i min_j d(μ_i, ν_j)`.
fn mixture_to_hull(d: &[Vec<f64>], mixtures: &[Vec<(usize, f64)>]) -> f64 {
    let nearest: Vec<f64> = d.iter().map(|r| r.iter().copied().fold(f64::INFINITY, f64::min)).collect();
    let ergodic = nearest.iter().copied().fold(0.0, f64::max);
    mixtures
        .iter()
        .map(|m| m.iter().map(|&(i, w)| w * nearest[i]).sum::<f64>())
        .fold(ergodic, f64::max)
}

fn transpose(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..m[0].len()).map(|j| m.iter().map(|r| r[j]).collect()).collect()
}

fn besicovitch_pair(sys: &FiniteMetricSystem, a: &PeriodicOrbitMeasure, b: &PeriodicOrbitMeasure, radius: usize) -> f64 {
    let l = a.period() / gcd(a.period(), b.period()) * b.period();
    let r = radius as i64;
    let x = a.trajectory(-r, l as i64 - 1 + r);
    let y = b.trajectory(-r, l as i64 - 1 + r);
    besicovitch_pi(sys, &x, &y, l, radius).expect("windows cover the horizon").value
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn cross_level(
    sys: &FiniteMetricSystem,
    cfg: &PipelineConfig,
    (n, coarse): (usize, &[PeriodicOrbitMeasure]),
    (m, fine): (usize, &[PeriodicOrbitMeasure]),
    sampled: bool,
) -> CrossLevel {
    let metric = sys.metric();
    let k = cfg.pi_radius;
    let d = pairwise(coarse, fine, |a, b| pi_bar_periodic(a, b, metric, k).value);
    let hausdorff = hausdorff_from_matrix(&d);
    let bound = hausdorff_from_matrix(&pairwise(coarse, fine, |a, b| besicovitch_pair(sys, a, b, k)));

    let mut rng = level_rng(cfg.seed, 1_000_000 + (n * 1000 + m) as u64);
    let mix_coarse = sample_mixtures(coarse, cfg.mixture_samples, &mut rng);
    let mix_fine = sample_mixtures(fine, cfg.mixture_samples, &mut rng);
    let full = mixture_to_hull(&d, &mix_coarse).max(mixture_to_hull(&transpose(&d), &mix_fine));

    CrossLevel {
        coarse: n,
        fine: m,
        hausdorff,
        error_bar: pi_tail_bound(k),
        coarse_sample: coarse.len(),
        fine_sample: fine.len(),
        sampled,
        besicovitch_bound: bound,
        bound_holds: hausdorff <= bound + 1e-9,
        full_hausdorff: full,
        full_minus_ergodic: full - hausdorff,
    }
}

fn fit_exponent(points: &[TrendPoint]) -> Option<f64> {
    let xy: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.distance_to_finest > 0.0)
        .map(|p| ((p.n as f64).ln(), p.distance_to_finest.ln()))
        .collect();
    if xy.len() < 2 {
        return None;
    }
    let k = xy.len() as f64;
    let (mx, my) = (xy.iter().map(|p| p.0).sum::<f64>() / k, xy.iter().map(|p| p.1).sum::<f64>() / k);
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Target of the density demo when none is configured: half the first fixed
/// point of the map plus half its first 2-cycle, falling back to the first
/// 2-cycle of the chain graph when the map has none.
pub fn default_target(g: &ChainGraph<'_>) -> Option<Vec<TargetComponent>> {
    let sys = g.system();
    let fixed = (0..sys.len()).find(|&u| sys.image(u) == u)?;
    let two = match (0..sys.len()).find(|&u| sys.image(u) != u && sys.image(sys.image(u)) == u) {
        Some(u) => vec![u, sys.image(u)],
        None => (0..g.len())
            .flat_map(|u| g.out_neighbors(u).iter().map(move |&v| (u, v)))
            .find(|&(u, v)| u < v && g.has_edge(v, u))
            .map(|(u, v)| vec![u, v])?,
    };
    Some(vec![
        TargetComponent { word: vec![fixed], weight: 0.5 },
        TargetComponent { word: two, weight: 0.5 },
    ])
}

/// Sigmund approximants of the target mixture at every configured block
/// scale, with their weak* proxy and π̄ distances to the target.
pub fn density_demo(cfg: &PipelineConfig, sys: &FiniteMetricSystem, level: usize) -> Result<DensityReport> {
    let g = crate::chain::build_chain_graph(sys, 1.0 / level as f64)?;
    let m = mixing_certificate(&g).require_mixing()?;
    let target = match &cfg.target {
        Some(t) => t.clone(),
        None => default_target(&g).ok_or_else(|| Error::invalid("no fixed point and 2-cycle for a default target"))?,
    };
    let parts = target
        .iter()
        .map(|c| Ok((PeriodicOrbitMeasure::new(c.word.clone())?, c.weight)))
        .collect::<Result<Vec<_>>>()?;
    let total: f64 = parts.iter().map(|p| p.1).sum();
    let parts: Vec<_> = parts.into_iter().map(|(p, w)| (p, w / total)).collect();
    let mixture = MixtureMeasure::new(parts.clone())?;
    let target_cyl = mixture.cylinders(cfg.depth)?;

    let outcomes: Vec<(usize, Result<DensityRow>)> = cfg
        .block_scales
        .par_iter()
        .map(|&l| {
            let row = sigmund_approximation(&parts, &g, l).and_then(|s| {
                let weakstar = weakstar_proxy(&s.cylinders(cfg.depth)?, &target_cyl, sys.metric(), cfg.depth)?;
                let pi_bar = MixtureMeasure::ergodic(s.clone()).pi_bar(&mixture, sys.metric(), cfg.pi_radius)?;
                Ok(DensityRow { scale: l, period: s.period(), weakstar, pi_bar })
            });
            (l, row)
        })
        .collect();
    let mut rows = Vec::new();
    let mut degenerate_scales = Vec::new();
    for (l, r) in outcomes {
        match r {
            Ok(row) => rows.push(row),
            Err(Error::DegenerateWeights { .. }) => degenerate_scales.push(l),
            Err(e) => return Err(e),
        }
    }
    rows.sort_by_key(|r| r.scale);

    let first = rows.iter().position(|r| lt_tol(r.weakstar, cfg.density_threshold));
    let l_star = first.map(|i| rows[i].scale);
    let non_increasing_after_l_star = match first {
        Some(i) => rows[i..].windows(2).all(|w| w[1].weakstar <= w[0].weakstar + 1e-12),
        None => false,
    };
    let denom: f64 = rows.iter().map(|r| 1.0 / (r.scale as f64).powi(2)).sum();
    let fitted_c = (denom > 0.0).then(|| rows.iter().map(|r| r.weakstar / r.scale as f64).sum::<f64>() / denom);
    Ok(DensityReport {
        level,
        target,
        mixing_constant: m,
        rows,
        degenerate_scales,
        threshold: cfg.density_threshold,
        l_star,
        non_increasing_after_l_star,
        fitted_c,
        pi_error_bar: pi_tail_bound(cfg.pi_radius),
    })
}

fn timestamp() -> String {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("unix:{secs}")
}

/// Runs every stage. Stage failures are collected in `errors`; only a bad
/// configuration aborts the run.
pub fn run_pipeline(cfg: &PipelineConfig, sys: &FiniteMetricSystem) -> Result<PipelineReport> {
    cfg.validate()?;
    let family = chain_family(sys, cfg.n_max)?;
    let levels: Vec<Level<'_>> = family
        .graphs
        .into_par_iter()
        .map(|graph| {
            let cert = mixing_certificate(&graph);
            let ergodic = ergodic_measures_of_graph(&graph, cfg.max_period, cfg.enumeration_cap);
            Level { graph, cert, ergodic }
        })
        .collect();

    let mut errors = Vec::new();
    let mut reports = Vec::with_capacity(levels.len());
    for (i, lv) in levels.iter().enumerate() {
        let n = i + 1;
        let spacing = if lv.cert.is_mixing() {
            cfg.eps
                .iter()
                .filter_map(|&eps| match spacing_constant(eps, &lv.cert) {
                    Ok((radius, k)) => Some(SpacingEntry { eps, radius, k }),
                    Err(e) => {
                        errors.push(StageError { stage: format!("spacing/{n}"), message: e.to_string() });
                        None
                    }
                })
                .collect()
        } else {
            errors.push(StageError {
                stage: format!("mixing/{n}"),
                message: "level is not mixing; no specification constants".into(),
            });
            Vec::new()
        };
        let (count, truncated, by_period) = match &lv.ergodic {
            Ok(e) => {
                let mut by = vec![0; cfg.max_period];
                for m in &e.measures {
                    by[m.period() - 1] += 1;
                }
                (e.len(), e.truncated, by)
            }
            Err(err) => {
                errors.push(StageError { stage: format!("ergodic/{n}"), message: err.to_string() });
                (0, false, vec![0; cfg.max_period])
            }
        };
        reports.push(LevelReport {
            n,
            delta: lv.graph.delta(),
            edge_count: lv.graph.edge_count(),
            complete: lv.graph.is_complete(),
            certificate: lv.cert.clone(),
            spacing,
            ergodic_count: count,
            ergodic_truncated: truncated,
            ergodic_by_period: by_period,
        });
    }

    let samples: Vec<Option<(Vec<PeriodicOrbitMeasure>, bool)>> = levels
        .iter()
        .enumerate()
        .map(|(i, lv)| {
            lv.ergodic.as_ref().ok().filter(|e| !e.is_empty()).map(|e| {
                let s = sample_measures(e, cfg.hausdorff_sample, cfg.seed, i as u64);
                let sampled = s.len() < e.len() || e.truncated;
                (s, sampled)
            })
        })
        .collect();
    let pairs: Vec<(usize, usize)> =
        (1..=cfg.n_max).flat_map(|n| (n + 1..=cfg.n_max).map(move |m| (n, m))).collect();
    let cross_levels: Vec<CrossLevel> = pairs
        .par_iter()
        .filter_map(|&(n, m)| {
            let (a, sa) = samples[n - 1].as_ref()?;
            let (b, sb) = samples[m - 1].as_ref()?;
            Some(cross_level(sys, cfg, (n, a), (m, b), *sa || *sb))
        })
        .collect();

    let mut points: Vec<TrendPoint> = cross_levels
        .iter()
        .filter(|c| c.fine == cfg.n_max)
        .map(|c| TrendPoint { n: c.coarse, distance_to_finest: c.hausdorff })
        .collect();
    if samples[cfg.n_max - 1].is_some() {
        points.push(TrendPoint { n: cfg.n_max, distance_to_finest: 0.0 });
    }
    let trend = Trend {
        non_increasing: points.windows(2).all(|w| w[1].distance_to_finest <= w[0].distance_to_finest + 1e-12),
        fitted_exponent: fit_exponent(&points),
        points,
    };

    let density = match density_demo(cfg, sys, cfg.density_level()) {
        Ok(d) => Some(d),
        Err(e) => {
            errors.push(StageError { stage: "density".into(), message: e.to_string() });
            None
        }
    };

    Ok(PipelineReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: cfg.digest(),
        generated_at: timestamp(),
        config: cfg.clone(),
        system: SystemSummary {
            points: sys.len(),
            clamped: sys.was_clamped(),
            critical_deltas: family.critical_deltas.len(),
        },
        levels: reports,
        cross_levels,
        trend,
        density,
        errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::solve_transport;

    fn cfg(text: &str) -> PipelineConfig {
        parse_config(text).unwrap()
    }

    #[test]
    fn single_level_is_trivial() {
        let c = cfg(r#"{"system": {"generator": "circle_doubling", "n": 6}, "n_max": 1, "block_scales": [8]}"#);
        let sys = c.load_system(None).unwrap();
        let r = run_pipeline(&c, &sys).unwrap();
        assert_eq!(r.levels.len(), 1);
        assert!(r.levels[0].complete);
        assert_eq!(r.levels[0].certificate.mixing_constant, Some(1));
        assert!(r.cross_levels.is_empty());
        assert_eq!(r.trend.points, vec![TrendPoint { n: 1, distance_to_finest: 0.0 }]);
    }

    #[test]
    fn doubling_grid_levels() {
        let c = cfg(
            r#"{"system": {"generator": "circle_doubling", "n": 16}, "n_max": 8, "max_period": 6,
                "hausdorff_sample": 16, "block_scales": [16, 32]}"#,
        );
        let sys = c.load_system(None).unwrap();
        let r = run_pipeline(&c, &sys).unwrap();
        assert_eq!(r.levels.len(), 8);
        for w in r.levels.windows(2) {
            assert!(w[1].edge_count <= w[0].edge_count);
        }
        // δ ≥ grid resolution 1/16 at every level here
        assert!(r.levels.iter().all(|l| l.certificate.is_mixing()));
        assert!(r.levels.iter().all(|l| l.spacing.len() == 2));
        assert_eq!(r.cross_levels.len(), 28);
        for c in &r.cross_levels {
            assert!(c.bound_holds, "{c:?}");
            assert!(c.full_minus_ergodic.abs() < 1e-12);
        }
        assert!(r.density.is_some());
    }

    #[test]
    fn disconnected_permutation_flags_levels() {
        // two far fixed points on a line grid
        let c = cfg(
            r#"{"system": {"metric": {"line_grid": 2}, "map": [0, 1]}, "n_max": 3, "block_scales": [8]}"#,
        );
        let sys = c.load_system(None).unwrap();
        let r = run_pipeline(&c, &sys).unwrap();
        assert!(r.levels[0].certificate.is_mixing());
        assert!(!r.levels[1].certificate.is_mixing());
        assert!(r.levels[1].spacing.is_empty());
        assert!(r.errors.iter().any(|e| e.stage == "mixing/2"));
        assert!(r.errors.iter().any(|e| e.stage == "density"));
    }

    #[test]
    fn hull_distance_is_dominated_by_explicit_mixtures() {
        // distance from a mixture to the hull never exceeds its transport
        // distance to any particular mixture of the column set
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let (r, c) = (rng.gen_range(2..5), rng.gen_range(2..5));
            let d: Vec<Vec<f64>> = (0..r).map(|_| (0..c).map(|_| rng.gen::<f64>()).collect()).collect();
            let set: Vec<PeriodicOrbitMeasure> = (0..r).map(PeriodicOrbitMeasure::fixed_point).collect();
            let mixes = sample_mixtures(&set, 5, &mut rng);
            let hull = mixture_to_hull(&d, &mixes);
            for m in &mixes {
                let a: Vec<f64> = (0..r).map(|i| m.iter().filter(|p| p.0 == i).map(|p| p.1).sum()).collect();
                let raw: Vec<f64> = (0..c).map(|_| rng.gen_range(0.01..1.0)).collect();
                let t: f64 = raw.iter().sum();
                let b: Vec<f64> = raw.iter().map(|x| x / t).collect();
                let cost = solve_transport(&a, &b, |i, j| d[i][j]).unwrap().cost;
                let own = m.iter().map(|&(i, w)| w * d[i].iter().copied().fold(f64::INFINITY, f64::min)).sum::<f64>();
                assert!(own <= cost + 1e-12);
                assert!(own <= hull + 1e-12);
            }
        }
    }

    #[test]
    fn density_demo_on_complete_two_point_graph() {
        let c = cfg(
            r#"{"system": {"metric": {"line_grid": 2}, "map": [0, 1]}, "n_max": 1,
                "target": [{"word": [0], "weight": 0.5}, {"word": [1], "weight": 0.5}],
                "block_scales": [4, 8, 16, 32, 64]}"#,
        );
        let sys = c.load_system(None).unwrap();
        let d = density_demo(&c, &sys, 1).unwrap();
        assert_eq!(d.mixing_constant, 1);
        for row in &d.rows {
            assert!(row.weakstar <= 1.0 / row.scale as f64 + 1e-12, "{row:?}");
        }
        assert!(d.fitted_c.unwrap() <= 1.0);
        assert!(d.non_increasing_after_l_star);
    }

    #[test]
    fn ergodic_target_gives_zero() {
        let c = cfg(
            r#"{"system": {"generator": "circle_doubling", "n": 4}, "n_max": 4,
                "target": [{"word": [0], "weight": 1}], "block_scales": [8, 16]}"#,
        );
        let sys = c.load_system(None).unwrap();
        let d = density_demo(&c, &sys, 4).unwrap();
        assert!(d.rows.iter().all(|r| r.weakstar == 0.0));
    }
}
