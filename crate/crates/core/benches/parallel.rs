//! Parallel core against a single worker. The single-worker pool runs the
//! same code path as the sequential build, without the feature switch.

use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qvalued::campanato::{decay_exponent, Ladder};
use qvalued::harmonic::BranchPower;
use qvalued::{best_fit, Domain, FitConfig, QField, Region, SampledQFunction};

fn data(h: f64) -> SampledQFunction {
    let f: Arc<dyn QField> = Arc::new(BranchPower::three_halves(2));
    let grid = Domain::unit_ball(2).sample(h).unwrap();
    SampledQFunction::from_field(grid, f).unwrap()
}

fn pools() -> Vec<(String, rayon::ThreadPool)> {
    let all = rayon::current_num_threads();
    let mut v = vec![("1 thread".to_string(), rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap())];
    if all > 1 {
        v.push((format!("{all} threads"), rayon::ThreadPoolBuilder::new().num_threads(all).build().unwrap()));
    }
    v
}

fn bench(c: &mut Criterion) {
    let u = data(1.0 / 128.0);
    let region = Region::new(&[0.0, 0.0], 1.0);
    let cfg = FitConfig::default();
    let ladder = Ladder::new(0.5, 5);

    let mut g = c.benchmark_group("best_fit");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(&name), |b| {
            b.iter(|| pool.install(|| best_fit(&u, &region, 1, 2.0, &cfg).unwrap()))
        });
    }
    g.finish();

    let mut g = c.benchmark_group("decay_exponent");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(&name), |b| {
            b.iter(|| pool.install(|| decay_exponent(&u, &[0.0, 0.0], 1, 2.0, &ladder, &cfg).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
