use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kglab::dyadic::partition_check;
use kglab::experiments::{dispersion_decay, DispersionSettings};
use kglab::norms::{random_smooth_family, znorm_weight_audit};
use kglab::phases::{audit_phase_bounds, BoundId, Sampling};
use kglab::pseudoproduct::{bound_audit, AuditSettings, Lemma, SymbolTables};
use kglab::{make_grid, Exec};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn phase_audit(c: &mut Criterion) {
    let mut g = c.benchmark_group("phase_audit");
    let s = Sampling::Uniform { count: 50_000, range: 1024.0, seed: 1 };
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::new("3phase", name), &exec, |b, &e| {
            b.iter(|| audit_phase_bounds(BoundId::ThreePhase, black_box(&s), e).unwrap())
        });
    }
    g.finish();
}

fn multiplier_audit(c: &mut Criterion) {
    let mut g = c.benchmark_group("multiplier_audit");
    g.sample_size(10);
    let tables = Arc::new(SymbolTables::u_squared().merged(&SymbolTables::dtu_sq_dxu()));
    let mut s = AuditSettings::for_lemma(Lemma::Trilin);
    s.k_hi = 2;
    s.n = 64;
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::new("trilin", name), &exec, |b, &e| {
            b.iter(|| bound_audit(Lemma::Trilin, black_box(&s), &tables, e).unwrap())
        });
    }
    g.finish();
}

fn partition(c: &mut Criterion) {
    let mut g = c.benchmark_group("partition_check");
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::new("10k", name), &exec, |b, &e| b.iter(|| partition_check(10_000, e).unwrap()));
    }
    g.finish();
}

fn znorm_family(c: &mut Criterion) {
    let mut g = c.benchmark_group("znorm_weight_audit");
    g.sample_size(10);
    let grid = make_grid(1024, 128.0 * std::f64::consts::PI).unwrap();
    let fam = random_smooth_family(&grid, 20, 3);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::new("20 fields", name), &exec, |b, &e| {
            b.iter(|| znorm_weight_audit(black_box(&fam), 0.5, 0.75, e).unwrap())
        });
    }
    g.finish();
}

fn dispersion(c: &mut Criterion) {
    let mut g = c.benchmark_group("dispersion_decay");
    g.sample_size(10);
    let s = DispersionSettings { horizon: 50.0, ..DispersionSettings::standard() };
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::new("n4096", name), &exec, |b, &e| b.iter(|| dispersion_decay(black_box(&s), e).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, phase_audit, multiplier_audit, partition, znorm_family, dispersion);
criterion_main!(benches);
