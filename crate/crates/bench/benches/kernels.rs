use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use densemss::checks::random_spd_buffer;
use densemss::dense::{gram, ldlt_pivoted, sym_eig};
use densemss::{build_view, choose_params, problem, solve, solve_obs, InitOption, SolverKind, TrConfig};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dense_kernels(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut group = c.benchmark_group("dense");
    for k in [6, 10, 14] {
        let x = DMatrix::from_fn(40, k, |_, _| rng.gen_range(-1.0..1.0));
        let a = gram(&x);
        group.bench_with_input(BenchmarkId::new("ldlt_pivoted", k), &a, |b, a| {
            b.iter(|| ldlt_pivoted(black_box(a), 1e-8).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("sym_eig", k), &a, |b, a| b.iter(|| sym_eig(black_box(a))));
    }
    group.finish();
}

fn compact_build(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut group = c.benchmark_group("build_view");
    let n = 1000;
    for l in [3, 5, 7] {
        let buf = random_spd_buffer(&mut rng, 200, l);
        // lift to n = 1000 by padding with zeros
        let mut big = densemss::PairBuffer::new(n, l);
        let pad = |v: &DVector<f64>| DVector::from_fn(n, |i, _| if i < v.len() { v[i] } else { 0.0 });
        for (s, y) in buf.iter().collect::<Vec<_>>().into_iter().rev() {
            big.push(pad(s), pad(y));
        }
        let (zeta, zeta_c) = choose_params(InitOption::HalfSumBb, &big);
        group.bench_with_input(BenchmarkId::from_parameter(l), &big, |b, big| {
            b.iter(|| build_view(black_box(big), zeta, zeta_c, 1e-8).unwrap())
        });
        let (_, view) = build_view(&big, zeta, zeta_c, 1e-8).unwrap();
        let g = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        group.bench_with_input(BenchmarkId::new("solve_obs", l), &view, |b, view| {
            b.iter(|| solve_obs(black_box(view), &g, 0.5).unwrap())
        });
    }
    group.finish();
}

fn full_solves(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve");
    group.sample_size(10);
    let p = problem("ext-rosenbrock", 1000).unwrap();
    for solver in [SolverKind::Mss, SolverKind::Lsr1Bb] {
        let cfg = TrConfig { solver, ..TrConfig::default() };
        group.bench_function(BenchmarkId::new("ext-rosenbrock-1000", solver.name()), |b| {
            b.iter(|| solve(&p, &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, dense_kernels, compact_build, full_solves);
criterion_main!(benches);
