use std::hint::black_box;

use coulomb_core::bessel::{sample_besq_exact, BesselSpec};
use coulomb_core::meanfield::{gaussian_density, Grid2D, GridDensityPair, PdeParams, PdeSolver};
use coulomb_core::model::PairScanner;
use coulomb_core::{NoiseStream, SignedConfiguration, Vec2};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn lattice(n: usize) -> SignedConfiguration {
    let side = (n as f64).sqrt().ceil() as usize;
    let pos: Vec<[f64; 2]> = (0..n).map(|k| [(k % side) as f64 * 0.1, (k / side) as f64 * 0.1 + 1e-3 * k as f64]).collect();
    let signs: Vec<i8> = (0..n).map(|k| if k % 2 == 0 { 1 } else { -1 }).collect();
    SignedConfiguration::from_raw(&pos, &signs).unwrap()
}

fn pair_scan(c: &mut Criterion) {
    let mut group = c.benchmark_group("pair_scan");
    for n in [16, 128, 512] {
        let config = lattice(n);
        let mut scanner = PairScanner::default();
        group.bench_with_input(BenchmarkId::from_parameter(n), &config, |b, cfg| {
            b.iter(|| scanner.scan(black_box(cfg), 1e-3, &[0.5]))
        });
    }
    group.finish();
}

fn besq_exact(c: &mut Criterion) {
    let spec = BesselSpec::new(1.5, 1.0).unwrap();
    let mut rng = NoiseStream::new(0, 0).rng();
    c.bench_function("besq_exact", |b| b.iter(|| sample_besq_exact(black_box(&spec), 2.0, &mut rng).unwrap()));
}

fn pde_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("pde_step");
    group.sample_size(20);
    for m in [64, 256] {
        let grid = Grid2D::new(8.0, m).unwrap();
        let state = GridDensityPair::new(
            grid,
            gaussian_density(&grid, Vec2::new(-0.5, 0.0), 0.25, 0.5).unwrap(),
            gaussian_density(&grid, Vec2::new(0.5, 0.0), 0.25, 0.5).unwrap(),
        )
        .unwrap();
        let mut solver = PdeSolver::new(grid, PdeParams { gammabar: 0.3, nu: 0.5, scheme: Default::default() }).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(m), &state, |b, s| b.iter(|| solver.step(black_box(s), 1e-3).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, pair_scan, besq_exact, pde_step);
criterion_main!(benches);
