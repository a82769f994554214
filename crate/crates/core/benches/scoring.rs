//! Candidate-scoring throughput: data-parallel vs sequential. Run with
//! `cargo bench -p dualpath-core` (parallel feature on by default) or
//! `--no-default-features` to measure the sequential-only build.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use dualpath_core::fast::generate_candidates;
use dualpath_core::reward::{score_candidates, score_candidates_seq};
use dualpath_core::suite::straight_road_scenario;
use dualpath_core::world::predict_states;
use dualpath_core::Config;

fn bench_scoring(c: &mut Criterion) {
    let cfg = Config::default();
    let scenario = straight_road_scenario(20, 8.0, &[]);
    let state = scenario.initial_state();
    let states = predict_states(&state, &scenario, cfg.kinematics.horizon_steps - 1);

    let mut group = c.benchmark_group("score_candidates");
    for n_k in [8usize, 32, 128] {
        let set = generate_candidates(&state, &scenario, &cfg.kinematics, n_k, 7).unwrap();
        group.bench_with_input(BenchmarkId::new("sequential", 3 * n_k), &set, |b, set| {
            b.iter(|| score_candidates_seq(set, &states, &scenario, &cfg.reward).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("default", 3 * n_k), &set, |b, set| {
            b.iter(|| score_candidates(set, &states, &scenario, &cfg.reward).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_scoring);
criterion_main!(benches);
