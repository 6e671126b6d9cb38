use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use kyfan_tilt::oracle::{tilt_probe, ProbeConfig};
use kyfan_tilt::par::Exec;
use kyfan_tilt::testgen::{self, Engineered};
use kyfan_tilt::tilt::{analyze_tilt, TiltOptions};
use kyfan_tilt::validate::{run_suite, Suite};
use kyfan_tilt::Tolerances;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn validation_suites(c: &mut Criterion) {
    let mut group = c.benchmark_group("validate");
    group.sample_size(10);
    for suite in [Suite::Formulas, Suite::Quotient] {
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(suite.name(), name), &exec, |b, &exec| {
                b.iter(|| run_suite(suite, 0, 64, exec))
            });
        }
    }
    group.finish();
}

fn probe(c: &mut Criterion) {
    let mut r = testgen::rng(1, 0);
    let p = testgen::engineered(&mut r, Engineered::Transverse, 4, 5);
    let cfg = ProbeConfig::default();
    let mut group = c.benchmark_group("tilt_probe");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(name, |b| b.iter(|| tilt_probe(&p.spec, &cfg, exec).unwrap()));
    }
    group.finish();
}

fn witness_search(c: &mut Criterion) {
    let tol = Tolerances::default();
    let mut r = testgen::rng(2, 0);
    let p = testgen::engineered(&mut r, Engineered::SymmetricAlpha, 4, 5);
    let mut group = c.benchmark_group("analyze_tilt");
    for (name, exec) in MODES {
        let opts = TiltOptions { rotation_samples: 8, exec, ..TiltOptions::default() };
        group.bench_function(name, |b| b.iter(|| analyze_tilt(&p.spec, &tol, &opts).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, validation_suites, probe, witness_search);
criterion_main!(benches);
