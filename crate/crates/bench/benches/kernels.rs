use std::hint::black_box;

use bpre_core::benchmarks::m1;
use bpre_core::bounds::{evaluate, BoundConstants, Theorem};
use bpre_core::exact::{EnumerationLimits, RatioDistribution};
use bpre_core::intervals::delta_bernstein;
use bpre_core::process::offspring_sum_sample;
use bpre_core::rng::replica_rng;
use bpre_core::{GrowthPolicy, OffspringLaw, Simulator};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn offspring_sums(c: &mut Criterion) {
    let law = OffspringLaw::new(&[(1, 0.25), (2, 0.5), (3, 0.25)]).unwrap();
    let mut group = c.benchmark_group("offspring_sum");
    for z in [10u64, 10_000, 10_000_000] {
        group.bench_with_input(BenchmarkId::from_parameter(z), &z, |b, &z| {
            let mut rng = replica_rng(1, 0);
            b.iter(|| offspring_sum_sample(&law, black_box(z), &mut rng));
        });
    }
    group.finish();
}

fn trajectories(c: &mut Criterion) {
    let env = m1();
    let sim = Simulator::new(&env, GrowthPolicy::clt(10_000_000)).unwrap();
    let mut id = 0u64;
    c.bench_function("simulate_m1_65_generations", |b| {
        b.iter(|| {
            id += 1;
            sim.simulate(65, 7, id).unwrap()
        })
    });
}

fn bounds(c: &mut Criterion) {
    let constants = BoundConstants::from_env(&m1(), 0.5, 3.0, 1.5).unwrap();
    let mut group = c.benchmark_group("bound");
    for theorem in Theorem::ALL {
        let grid = theorem.default_x_grid(&constants);
        group.bench_function(theorem.id(), |b| {
            b.iter(|| {
                grid.iter()
                    .map(|&x| evaluate(theorem, x, 64, &constants).unwrap().value())
                    .sum::<f64>()
            })
        });
    }
    group.finish();
    c.bench_function("delta_bernstein", |b| {
        b.iter(|| delta_bernstein(black_box(100), 0.05, 1.0, 1.0).unwrap())
    });
}

fn enumeration(c: &mut Criterion) {
    let env = m1();
    c.bench_function("enumerate_m1_n0_1_n_3", |b| {
        b.iter(|| RatioDistribution::enumerate(&env, 1, 3, EnumerationLimits::default()).unwrap())
    });
}

criterion_group!(benches, offspring_sums, trajectories, bounds, enumeration);
criterion_main!(benches);
