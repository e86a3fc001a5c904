use std::hint::black_box;

use clickhomodyne_core::hbt::{g2_at_shift, g2_curve};
use clickhomodyne_core::homodyne::{difference_series, rate_normalized_variance};
use clickhomodyne_core::model::{seconds_to_ps, SimConfig};
use clickhomodyne_core::simgen::{apply_dead_time, generate_poisson_stream, simulate_detector_pair, RngSpec};
use clickhomodyne_core::timetag::{bin_counts, decode_stream, encode_stream};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

const BIN_PS: u64 = 500_000;

fn generation(c: &mut Criterion) {
    let mut group = c.benchmark_group("simgen");
    for rate in [1e5, 1e6, 1e7] {
        let d = seconds_to_ps(0.1);
        group.throughput(Throughput::Elements((rate * 0.1) as u64));
        group.bench_with_input(BenchmarkId::new("poisson", rate), &rate, |b, &rate| {
            b.iter(|| generate_poisson_stream(rate, d, &RngSpec::new(1, "lo")))
        });
        let s = generate_poisson_stream(rate, d, &RngSpec::new(1, "lo"));
        group.bench_with_input(BenchmarkId::new("dead_time", rate), &s, |b, s| {
            b.iter(|| apply_dead_time(s.clone(), 100_000))
        });
    }
    let cfg = SimConfig {
        lo_flux_hz: 2e6,
        duration_ps: seconds_to_ps(0.1),
        seed: 7,
        ..Default::default()
    };
    group.bench_function("detector_pair_2MHz_100ms", |b| {
        b.iter(|| simulate_detector_pair(black_box(&cfg)).unwrap())
    });
    group.finish();
}

fn analysis(c: &mut Criterion) {
    let cfg = SimConfig {
        lo_flux_hz: 3e6,
        duration_ps: seconds_to_ps(1.0),
        seed: 11,
        ..Default::default()
    };
    let (a, b) = simulate_detector_pair(&cfg).unwrap();
    let ba = bin_counts(&a, BIN_PS).unwrap();
    let bb = bin_counts(&b, BIN_PS).unwrap();

    let mut group = c.benchmark_group("analysis");
    group.throughput(Throughput::Elements(ba.len() as u64));
    group.bench_function("bin_counts", |bench| bench.iter(|| bin_counts(&a, BIN_PS).unwrap()));
    group.bench_function("difference_variance", |bench| {
        bench.iter(|| {
            let d = difference_series(&ba, &bb).unwrap();
            rate_normalized_variance(&d).unwrap()
        })
    });
    group.bench_function("g2_tau0", |bench| bench.iter(|| g2_at_shift(&ba, &bb, 0).unwrap()));
    group.bench_function("g2_curve_20", |bench| bench.iter(|| g2_curve(&ba, &bb, 20).unwrap()));
    group.finish();

    let mut group = c.benchmark_group("timetag_io");
    group.throughput(Throughput::Bytes(8 * a.len() as u64));
    group.bench_function("encode", |bench| bench.iter(|| encode_stream(&a)));
    let bytes = encode_stream(&a);
    group.bench_function("decode", |bench| bench.iter(|| decode_stream(&bytes).unwrap()));
    group.finish();
}

criterion_group!(benches, generation, analysis);
criterion_main!(benches);
