use std::hint::black_box;

use adaptive_t::adaptive::{self, AdaptiveConfig, Init};
use adaptive_t::baselines::fit_garch_mle;
use adaptive_t::moments::NuInversionTable;
use adaptive_t::StudentTParams;
use adaptive_t_bench::{garch_series, regime_series};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

fn log_pdf(c: &mut Criterion) {
    let dist = StudentTParams::new(0.0, 1.0, 4.5).unwrap();
    let xs: Vec<f64> = (0..1000).map(|i| (i as f64 - 500.0) / 50.0).collect();
    let mut group = c.benchmark_group("log_pdf");
    group.throughput(Throughput::Elements(xs.len() as u64));
    group.bench_function("t4.5", |b| {
        b.iter(|| xs.iter().map(|&x| dist.log_pdf(black_box(x))).sum::<f64>())
    });
    group.finish();
}

fn table(c: &mut Criterion) {
    c.bench_function("table_build", |b| {
        b.iter(|| NuInversionTable::with_defaults(black_box(1.0), 0.5).unwrap())
    });
    let t = NuInversionTable::with_defaults(1.0, 0.5).unwrap();
    let (lo, hi) = (t.ratio_grid()[0], t.ratio_grid()[t.ratio_grid().len() - 1]);
    let rs: Vec<f64> = (0..1000)
        .map(|i| lo + (hi - lo) * i as f64 / 999.0)
        .collect();
    c.bench_function("table_invert_1000", |b| {
        b.iter(|| rs.iter().map(|&r| t.invert(black_box(r))).sum::<f64>())
    });
}

fn adaptive_run(c: &mut Criterion) {
    let mut group = c.benchmark_group("adaptive_run");
    for n in [10_000usize, 30_000] {
        let xs = regime_series(n);
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::new("full", n), &xs, |b, xs| {
            b.iter(|| adaptive::run(xs, &AdaptiveConfig::default(), Init::default()).unwrap())
        });
        let fixed = AdaptiveConfig {
            nu_fixed: Some(4.0),
            ..AdaptiveConfig::default()
        };
        group.bench_with_input(BenchmarkId::new("fixed_nu", n), &xs, |b, xs| {
            b.iter(|| adaptive::run(xs, &fixed, Init::default()).unwrap())
        });
    }
    group.finish();
}

fn garch_fit(c: &mut Criterion) {
    let xs = garch_series(20_000);
    let mut group = c.benchmark_group("garch");
    group.sample_size(10);
    group.bench_function("fit_20k", |b| {
        b.iter(|| fit_garch_mle(black_box(&xs)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, log_pdf, table, adaptive_run, garch_fit);
criterion_main!(benches);
