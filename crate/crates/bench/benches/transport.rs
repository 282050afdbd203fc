use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mixwass_bench::pair;
use mixwass_core::transport::{kr_dual_value, restricted_polytope, wasserstein_primal, DualPolytope};

fn primal(c: &mut Criterion) {
    let mut g = c.benchmark_group("wasserstein_primal");
    for k in [5, 10, 25] {
        let f = pair(200, k, 500, 7);
        g.bench_with_input(BenchmarkId::from_parameter(k), &f, |b, f| {
            b.iter(|| wasserstein_primal(black_box(&f.alpha), black_box(&f.beta), &f.cost).unwrap())
        });
    }
    g.finish();
}

fn dual(c: &mut Criterion) {
    let mut g = c.benchmark_group("kr_dual");
    for k in [5, 10, 25] {
        let f = pair(200, k, 500, 7);
        let u: Vec<f64> = f.alpha.as_slice().iter().zip(f.beta.as_slice()).map(|(a, b)| a - b).collect();
        let full = DualPolytope::new(f.cost.clone());
        let facet = restricted_polytope(&f.cost, f.alpha.as_slice(), f.beta.as_slice(), None, 0.0).unwrap();
        g.bench_with_input(BenchmarkId::new("full", k), &u, |b, u| b.iter(|| kr_dual_value(black_box(u), &full).unwrap()));
        g.bench_with_input(BenchmarkId::new("facet", k), &u, |b, u| b.iter(|| kr_dual_value(black_box(u), &facet).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, primal, dual);
criterion_main!(benches);
