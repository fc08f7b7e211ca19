//! Divergence, quadrature, and maximin-LP benchmarks.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use phidelta_bench::scenario;
use phidelta_core::dist::{kld, tvd, Density};
use phidelta_core::lp::maximin_distribution;
use phidelta_core::model::Family;
use phidelta_core::quad::{integrate, Domain};

fn bench_divergences(c: &mut Criterion) {
    let p = Density::exponential(1.0).unwrap();
    let q = Density::exponential(2.3).unwrap();
    c.bench_function("tvd_closed_form", |b| {
        b.iter(|| black_box(tvd(&p, &q).unwrap().value))
    });
    let n = Density::unit_normal(1.0).unwrap();
    c.bench_function("kld_quadrature_cross_family", |b| {
        b.iter(|| black_box(kld(&p, &n).unwrap().value))
    });
}

fn bench_quadrature(c: &mut Criterion) {
    c.bench_function("quad_normal_mass", |b| {
        b.iter(|| {
            black_box(
                integrate(
                    |x| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt(),
                    Domain::RealLine,
                )
                .unwrap()
                .value,
            )
        })
    });
}

fn bench_maximin(c: &mut Criterion) {
    // The exploration LP of the reference scenario: H(H-1) rows, 16 columns.
    let inst = scenario(Family::UnitNormal);
    let h = inst.hypotheses();
    let mut rows = Vec::new();
    for i in 0..h {
        for j in 0..h {
            if i == j {
                continue;
            }
            let row: Vec<f64> = (0..inst.actions())
                .map(|a| kld(inst.density(i, a), inst.density(j, a)).unwrap().value)
                .collect();
            rows.push(row);
        }
    }
    c.bench_function("maximin_pairs_lp", |b| {
        b.iter(|| black_box(maximin_distribution(&rows).unwrap().value))
    });
}

criterion_group!(benches, bench_divergences, bench_quadrature, bench_maximin);
criterion_main!(benches);
