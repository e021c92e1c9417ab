//! Run twice to compare execution modes:
//!
//! ```text
//! cargo bench -p pseudochain
//! cargo bench -p pseudochain --no-default-features
//! ```
//!
//! Benchmark ids carry the mode so criterion keeps both baselines apart.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use pseudochain::chain::{build_chain_graph, chain_family};
use pseudochain::measures::{ergodic_measures_of_graph, pairwise, pi_bar_periodic};
use pseudochain::par::mode;
use pseudochain::pipeline::{parse_config, run_pipeline};
use pseudochain::FiniteMetricSystem;

fn bench_chain_family(c: &mut Criterion) {
    let sys = FiniteMetricSystem::circle_doubling(64).unwrap();
    c.bench_function(&format!("chain_family/doubling-64/{}", mode()), |b| {
        b.iter(|| chain_family(black_box(&sys), 8).unwrap())
    });
}

fn bench_ergodic(c: &mut Criterion) {
    let sys = FiniteMetricSystem::circle_doubling(15).unwrap();
    let g = build_chain_graph(&sys, 0.2).unwrap();
    let mut group = c.benchmark_group(format!("ergodic_enumeration/{}", mode()));
    for p in [4, 6] {
        group.bench_with_input(BenchmarkId::from_parameter(p), &p, |b, &p| {
            b.iter(|| ergodic_measures_of_graph(&g, p, usize::MAX).unwrap())
        });
    }
    group.finish();
}

fn bench_pairwise_pi(c: &mut Criterion) {
    let sys = FiniteMetricSystem::circle_doubling(15).unwrap();
    let g = build_chain_graph(&sys, 0.2).unwrap();
    let set = ergodic_measures_of_graph(&g, 4, usize::MAX).unwrap();
    let ms = &set.measures[..set.measures.len().min(60)];
    c.bench_function(&format!("pairwise_pi_bar/{}x{}/{}", ms.len(), ms.len(), mode()), |b| {
        b.iter(|| pairwise(ms, ms, |p, q| pi_bar_periodic(p, q, sys.metric(), 10).value))
    });
}

fn bench_pipeline(c: &mut Criterion) {
    let cfg = parse_config(
        r#"{"system": {"generator": "random_metric", "n": 10, "seed": 3}, "n_max": 5, "max_period": 4,
            "block_scales": [8, 16, 32]}"#,
    )
    .unwrap();
    let sys = cfg.load_system(None).unwrap();
    let mut group = c.benchmark_group("pipeline");
    group.sample_size(10);
    group.bench_function(format!("random-10/{}", mode()), |b| b.iter(|| run_pipeline(&cfg, &sys).unwrap()));
    group.finish();
}

criterion_group!(benches, bench_chain_family, bench_ergodic, bench_pairwise_pi, bench_pipeline);
criterion_main!(benches);
