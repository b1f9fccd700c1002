use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;
use std::hint::black_box;

use rcl::circular::{self, CircularProblem};
use rcl::fem2d::SolveOptions;
use rcl::rect::{self, RectProblem};
use rcl::specfun::{bessel_j_sequence, hankel1_scaled_sequence};
use rcl::spectral1d::{assemble_mode, solve_mode, ModeOperators};

fn bessel(c: &mut Criterion) {
    let mut g = c.benchmark_group("bessel");
    for &(n, x) in &[(60usize, 25.0), (300, 150.0)] {
        g.bench_with_input(BenchmarkId::new("j_sequence", n), &(n, x), |b, &(n, x)| {
            b.iter(|| bessel_j_sequence(black_box(n), black_box(x)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("scaled_hankel_sequence", n), &(n, x), |b, &(n, x)| {
            b.iter(|| hankel1_scaled_sequence(black_box(n), black_box(x)).unwrap())
        });
    }
    g.finish();
}

fn mode_solve(c: &mut Criterion) {
    let mut g = c.benchmark_group("mode");
    for &n in &[50usize, 100] {
        let p = CircularProblem { degrees: [n, n], ..Default::default() };
        let mesh = p.mesh().unwrap();
        let ops = ModeOperators::assemble(&mesh, p.k);
        g.bench_with_input(BenchmarkId::new("assemble", n), &n, |b, _| b.iter(|| ModeOperators::assemble(&mesh, p.k)));
        g.bench_with_input(BenchmarkId::new("solve", n), &n, |b, _| {
            b.iter(|| solve_mode(&assemble_mode(&ops, black_box(7), Complex64::new(1.0, 0.0))).unwrap())
        });
    }
    g.sample_size(10);
    let p = CircularProblem { k: 20.0, degrees: [60, 60], ..Default::default() };
    g.bench_function("all_modes_k20_n60", |b| b.iter(|| circular::solve(&p).unwrap()));
    g.finish();
}

fn fem(c: &mut Criterion) {
    let mut g = c.benchmark_group("fem");
    g.sample_size(10);
    for &(degree, m) in &[(1usize, 32usize), (2, 32)] {
        let p = RectProblem { degree, m, ..Default::default() };
        g.bench_with_input(BenchmarkId::new(format!("square_N{degree}"), m), &p, |b, p| {
            b.iter(|| rect::solve_problem(p, &SolveOptions::default()).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bessel, mode_solve, fem);
criterion_main!(benches);
