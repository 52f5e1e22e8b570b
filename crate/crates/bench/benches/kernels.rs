use std::hint::black_box;

use alignflow::moc::integrals::a_term;
use alignflow::moc::scan::{scan_breakthrough, ShiftSet};
use alignflow::{make_grid, FlowState, Integrator, Moc, ScalarField, SolverConfig, TorusGrid};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn state(grid: &TorusGrid) -> FlowState {
    let rho = ScalarField::from_fn(grid, |x| 1.0 + 0.3 * x[0].sin() + 0.1 * (2.0 * x[0]).cos());
    let u = ScalarField::from_fn(grid, |x| (x[0] + 0.4).cos() - 0.2 * (3.0 * x[0]).sin());
    FlowState::new(rho, u, 0.0).unwrap()
}

fn fft(c: &mut Criterion) {
    let mut g = c.benchmark_group("fft_roundtrip");
    for (dim, n) in [(1, 512), (1, 4096), (2, 128)] {
        let grid = make_grid(dim, n, std::f64::consts::TAU).unwrap();
        let v: Vec<f64> = (0..grid.len()).map(|i| (i as f64 * 0.37).sin()).collect();
        g.bench_with_input(BenchmarkId::new(format!("{dim}d"), n), &v, |b, v| {
            b.iter(|| grid.inverse(&grid.forward(black_box(v))))
        });
    }
    g.finish();
}

fn solver(c: &mut Criterion) {
    let grid = make_grid(1, 512, std::f64::consts::TAU).unwrap();
    let s = state(&grid);
    let integ = Integrator::new(&grid, &SolverConfig::new(1.5)).unwrap();
    let dt = integ.stable_dt(&s);
    c.bench_function("rhs_1d_512", |b| b.iter(|| integ.rhs(black_box(&s))));
    c.bench_function("rk4_step_1d_512", |b| b.iter(|| integ.step(black_box(&s), dt).unwrap()));
}

fn quadrature(c: &mut Criterion) {
    let m = Moc::new(1.0, 0.5, 0.05).unwrap();
    let mut g = c.benchmark_group("a_term");
    for xi in [1e-3, 0.02, 1.0] {
        g.bench_with_input(BenchmarkId::from_parameter(xi), &xi, |b, &xi| {
            b.iter(|| a_term(black_box(xi), &m, 1.5, 1).unwrap())
        });
    }
    g.finish();
}

fn scan(c: &mut Criterion) {
    let grid = make_grid(1, 512, std::f64::consts::TAU).unwrap();
    let f = state(&grid).u;
    let shifts = ShiftSet::standard(&grid);
    let m = Moc::new(1.0, 0.5, 0.05).unwrap().scaled(4.0);
    c.bench_function("scan_1d_512", |b| b.iter(|| scan_breakthrough(black_box(&f), &m, 1.0, &shifts)));
}

criterion_group!(benches, fft, solver, quadrature, scan);
criterion_main!(benches);
