use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use imfdiag_core::ceemdan::{ceemdan_with, CeemdanConfig};
use imfdiag_core::dataset::{build_dataset, decompose_all};
use imfdiag_core::emd::{SiftConfig, Signal};
use imfdiag_core::synthetic::FaultBenchmark;
use imfdiag_core::Exec;

const POLICIES: [(&str, Exec); 2] = [("serial", Exec::Serial), ("parallel", Exec::Parallel)];

fn one_window(c: &mut Criterion) {
    let bench = FaultBenchmark::default();
    let signal = Signal::new(bench.damaged(4000, 1), bench.sample_rate_hz).unwrap();
    let cfg = CeemdanConfig { nr: 8, ..Default::default() };
    let sift = SiftConfig::default();
    let mut group = c.benchmark_group("ceemdan_4000");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| ceemdan_with(&signal, &cfg, &sift, exec).unwrap())
        });
    }
    group.finish();
}

fn dataset(c: &mut Criterion) {
    let records = FaultBenchmark::default().records(2, 8000, 2).unwrap();
    let raw = build_dataset(&records, 1000, 4, 3).unwrap();
    let cfg = CeemdanConfig { nr: 4, ..Default::default() };
    let sift = SiftConfig::default();
    let mut group = c.benchmark_group("decompose_all_16x1000");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| decompose_all(&raw, &cfg, &sift, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, one_window, dataset);
criterion_main!(benches);
