use adjsurv::{pseudo_values, weighted_km, KmVariance};
use adjsurv_bench::bench_dataset;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn km_bench(c: &mut Criterion) {
    let mut group = c.benchmark_group("weighted_km");
    for n in [500, 2000, 8000] {
        let data = bench_dataset(n);
        let weights = vec![1.0; n];
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| {
                weighted_km(
                    black_box(data.time()),
                    black_box(data.event()),
                    black_box(&weights),
                    KmVariance::Greenwood,
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

fn pseudo_bench(c: &mut Criterion) {
    let mut group = c.benchmark_group("pseudo_values");
    group.sample_size(10);
    for n in [200, 500, 1000] {
        let data = bench_dataset(n);
        let mut eval_times: Vec<f64> = data
            .time()
            .iter()
            .zip(data.event())
            .filter(|(_, &e)| e)
            .map(|(&t, _)| t)
            .collect();
        eval_times.sort_by(|a, b| a.total_cmp(b));
        eval_times.dedup();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| {
                pseudo_values(black_box(data.time()), black_box(data.event()), &eval_times)
                    .unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, km_bench, pseudo_bench);
criterion_main!(benches);
