use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use singloc::estimators::{bayes_estimate, EstimatorConfig};
use singloc::exec::{with_execution, Execution};
use singloc::harness::{run_rate_experiment, ExperimentConfig, ExperimentKind};
use singloc::limit::{draw_zeta_xi, LimitConfig};
use singloc::model::IntensityModel;
use singloc::sampler::sample_batch;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn model() -> IntensityModel {
    IntensityModel::pure_power(1.0, 1.0, 0.5, 1.0, 2.0, 0.5, 1.5).unwrap()
}

fn sampling(c: &mut Criterion) {
    let m = model();
    let mut group = c.benchmark_group("sample_batch");
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::new(name, 100_000), &m, |b, m| {
            b.iter(|| with_execution(mode, || sample_batch(m, 100_000, black_box(1)).unwrap()))
        });
    }
    group.finish();
}

fn posterior(c: &mut Criterion) {
    let m = model();
    let batch = sample_batch(&m, 1024, 2).unwrap();
    let cfg = EstimatorConfig::default();
    let mut group = c.benchmark_group("bayes_estimate");
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::new(name, cfg.grid_size), &batch, |b, batch| {
            b.iter(|| with_execution(mode, || bayes_estimate(batch, &m.family, &cfg).unwrap()))
        });
    }
    group.finish();
}

fn replicates(c: &mut Criterion) {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Rate, model());
    cfg.n_ladder = vec![16, 32, 64, 128];
    cfg.replicates = 40;
    let mut group = c.benchmark_group("rate_experiment");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_function(name, |b| b.iter(|| with_execution(mode, || run_rate_experiment(&cfg).unwrap())));
    }
    group.finish();
}

fn limit_draws(c: &mut Criterion) {
    let s = model().singularity();
    let cfg = LimitConfig::with_u_window(4.0);
    let mut group = c.benchmark_group("draw_zeta_xi");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| with_execution(mode, || draw_zeta_xi(&s, &cfg, 64, black_box(3)).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, sampling, posterior, replicates, limit_draws);
criterion_main!(benches);
