use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sg2d_core::chaos::make_chaos;
use sg2d_core::dynamics::hyperbolic_step;
use sg2d_core::fourier::project;
use sg2d_core::gaussian::sample_mu1;
use sg2d_core::gibbs::{pcn_step, ChainState};
use sg2d_core::{
    build_linear_tables, compute_sigma_n, forward_transform, inverse_transform, sample_pair_mu1, CutoffProfile, GridSpec,
    LinearModel, RngStream, SpectralGrid,
};

fn transforms(c: &mut Criterion) {
    let mut group = c.benchmark_group("fft_round_trip");
    for n in [8usize, 32, 128] {
        let g = SpectralGrid::new(GridSpec::new(n, PI)).unwrap();
        let u = sample_mu1(&g, &mut RngStream::new(1, 0));
        group.bench_with_input(BenchmarkId::from_parameter(g.m()), &u, |b, u| {
            b.iter(|| forward_transform(&g, &inverse_transform(&g, black_box(u))).unwrap())
        });
    }
    group.finish();
}

fn steps(c: &mut Criterion) {
    let g = SpectralGrid::new(GridSpec::new(16, PI)).unwrap();
    let tables = build_linear_tables(&g, 2f64.powi(-7), LinearModel::Hyperbolic).unwrap();
    let state = sample_pair_mu1(&g, &mut RngStream::new(2, 0));
    c.bench_function("hyperbolic_step_n16", |b| {
        let mut rng = RngStream::new(3, 0);
        b.iter(|| hyperbolic_step(&g, black_box(&state), &tables, &mut rng).unwrap())
    });
    c.bench_function("linear_propagate_n16", |b| {
        b.iter(|| {
            let mut s = state.clone();
            tables.propagate(&mut s);
            s
        })
    });
    c.bench_function("make_chaos_n16", |b| {
        let psi = project(&g, &state.u);
        b.iter(|| make_chaos(&g, black_box(&psi), g.constants(), 0.0).unwrap())
    });
    let mut rng = RngStream::new(4, 0);
    let mut chain = ChainState::new(&g, sample_mu1(&g, &mut rng), 0.2).unwrap();
    c.bench_function("pcn_step_n16", |b| b.iter(|| pcn_step(&g, &mut chain, &mut rng)));
}

fn sigma(c: &mut Criterion) {
    c.bench_function("sigma_n256", |b| b.iter(|| compute_sigma_n(black_box(256), CutoffProfile::Canonical)));
}

criterion_group!(benches, transforms, steps, sigma);
criterion_main!(benches);
