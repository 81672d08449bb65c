use std::hint::black_box;

use ckstab_core::{
    bound_by_bisection, jsr_lower_bound, jsr_upper_bound_norm, presets, simulate_cksvar,
    simulate_skeleton, LmiMode, MultiplierStructure, RegimeSystem,
};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn example3() -> RegimeSystem {
    RegimeSystem::from_canonical(&presets::example3().canonicalize(false).unwrap())
}

fn row5() -> RegimeSystem {
    let m = presets::univariate_two_lag(presets::TABLE2[4].0);
    RegimeSystem::from_canonical(&m.canonicalize(false).unwrap())
}

fn product_bounds(c: &mut Criterion) {
    let mut g = c.benchmark_group("product_bounds");
    let sys = row5();
    for depth in [4, 8, 12] {
        g.bench_with_input(BenchmarkId::new("lower", depth), &depth, |b, &d| {
            b.iter(|| jsr_lower_bound(black_box(&sys), d, true).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("upper_norm", depth), &depth, |b, &d| {
            b.iter(|| jsr_upper_bound_norm(black_box(&sys), d, true).unwrap())
        });
    }
    g.finish();
}

fn sdp_bounds(c: &mut Criterion) {
    let mut g = c.benchmark_group("sdp_bisection");
    g.sample_size(10);
    let ex3 = example3();
    let r5 = row5();
    g.bench_function("example3_jsr_degree2", |b| {
        b.iter(|| bound_by_bisection(&ex3, LmiMode::Jsr, 2, 1e-3, MultiplierStructure::Full).unwrap())
    });
    g.bench_function("example3_jsr_degree4", |b| {
        b.iter(|| bound_by_bisection(&ex3, LmiMode::Jsr, 4, 1e-3, MultiplierStructure::Full).unwrap())
    });
    g.bench_function("row5_rjsr_block", |b| {
        b.iter(|| bound_by_bisection(&r5, LmiMode::Rjsr, 2, 1e-3, MultiplierStructure::BlockDiagonal).unwrap())
    });
    g.finish();
}

fn simulation(c: &mut Criterion) {
    let m = presets::example3();
    let cm = m.canonicalize(false).unwrap();
    let init = nalgebra::DMatrix::from_element(1, 3, 1.0);
    c.bench_function("simulate_example3_400", |b| b.iter(|| simulate_cksvar(&m, 400, 1, None).unwrap()));
    c.bench_function("skeleton_example3_3000", |b| b.iter(|| simulate_skeleton(&cm, &init, 3000).unwrap()));
}

criterion_group!(benches, product_bounds, sdp_bounds, simulation);
criterion_main!(benches);
