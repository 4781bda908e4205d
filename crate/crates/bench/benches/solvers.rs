use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use newton_anderson::linalg::{least_squares, solve_linear, DenseMatrix};
use newton_anderson::{make_chandrasekhar, solve, SolverConfig};
use newton_anderson_bench::{dominant_matrix, tall_columns};

fn linalg(c: &mut Criterion) {
    let mut g = c.benchmark_group("lu_solve");
    for n in [50, 100, 200] {
        let a = dominant_matrix(n);
        let b = vec![1.0; n];
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |bench, _| {
            bench.iter(|| solve_linear(black_box(&a), black_box(&b)).unwrap())
        });
    }
    g.finish();

    let mut g = c.benchmark_group("least_squares");
    for m in [1, 3, 5] {
        let f = DenseMatrix::from_columns(&tall_columns(100, m));
        let b: Vec<f64> = (0..100).map(|i| (i as f64).cos()).collect();
        g.bench_with_input(BenchmarkId::from_parameter(m), &m, |bench, _| {
            bench.iter(|| least_squares(black_box(&f), black_box(&b)).unwrap())
        });
    }
    g.finish();
}

fn solvers(c: &mut Criterion) {
    let p = make_chandrasekhar(1.0, 100).unwrap();
    let x0 = vec![1.0; 100];
    let mut g = c.benchmark_group("chandrasekhar_c1_n100");
    for cfg in [
        SolverConfig::newton(),
        SolverConfig::na(1),
        SolverConfig::gna(0.5),
        SolverConfig::agna(0.5),
    ] {
        g.bench_function(cfg.label(), |bench| {
            bench.iter(|| solve(black_box(&p), black_box(&x0), &cfg).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, linalg, solvers);
criterion_main!(benches);
