//! Self-checks run by `bench check`: gradient verification over the suite
//! and randomized invariant sweeps over the core kernels.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::compact::{build_view, sym_lower, PairBuffer};
use crate::driver::{solve, SolverKind, TrConfig};
use crate::init::{choose_params, InitOption};
use crate::problems::{fd_gradient_check, fd_step, suite};
use crate::subproblem::{optimality_violations, solve_obs};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &str, failures: Vec<String>, total: usize) -> Self {
        let detail = match failures.first() {
            None => format!("{total} cases"),
            Some(first) => format!("{} of {total} failed; first: {first}", failures.len()),
        };
        Self { name: name.to_string(), passed: failures.is_empty(), detail }
    }
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
}

/// Pairs `y = As` for a random SPD `A`, so every `sᵀy > 0`.
pub fn random_spd_buffer(rng: &mut ChaCha8Rng, n: usize, l: usize) -> PairBuffer {
    let g = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let a = g.tr_mul(&g) + DMatrix::identity(n, n) * 0.5;
    let mut buf = PairBuffer::new(n, l);
    for _ in 0..l {
        let s = random_vec(rng, n);
        let y = &a * &s;
        buf.push(s, y);
    }
    buf
}

fn gradient_checks(n: usize, seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    let mut total = 0;
    for p in suite(n).expect("check dimension is valid") {
        let mut points = vec![p.x0.clone()];
        points.extend((0..3).map(|_| p.x0.map(|v| v + rng.gen_range(-0.1..0.1))));
        for x in points {
            total += 1;
            let err = fd_gradient_check(&p, &x, fd_step(&x));
            if !(err <= 1e-5) {
                failures.push(format!("{}: {err:e}", p.name));
            }
        }
    }
    CheckOutcome::new("gradients", failures, total)
}

fn secant_checks(cases: usize, seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    for case in 0..cases {
        let n = rng.gen_range(6..=40);
        let l = rng.gen_range(1..=5);
        let buf = random_spd_buffer(&mut rng, n, l);
        let option = InitOption::ALL[case % 4];
        let (zeta, zeta_c) = choose_params(option, &buf);
        let view = match build_view(&buf, zeta, zeta_c, 1e-8) {
            Ok((_, v)) => v,
            Err(e) => {
                failures.push(format!("case {case}: {e}"));
                continue;
            }
        };
        let (s, y) = buf.newest().expect("buffer is nonempty");
        let err = (view.apply_b(s) - y).norm() / y.norm();
        if !(err <= 1e-8) {
            failures.push(format!("case {case}: secant residual {err:e}"));
        }
        let sm = buf.s_matrix();
        let bs = DMatrix::from_fn(n, l, |i, j| view.apply_b(&sm.column(j).clone_owned())[i]);
        let target = sym_lower(&sm.tr_mul(&buf.y_matrix()));
        let err = (sm.tr_mul(&bs) - &target).norm() / target.norm();
        if !(err <= 1e-8) {
            failures.push(format!("case {case}: multisecant residual {err:e}"));
        }
    }
    CheckOutcome::new("secant identities", failures, cases)
}

fn subproblem_checks(cases: usize, seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    for case in 0..cases {
        let n = rng.gen_range(8..=25);
        let l = rng.gen_range(1..=3);
        let mut buf = PairBuffer::new(n, l);
        for _ in 0..l {
            // indefinite curvature is allowed here
            let s = random_vec(&mut rng, n);
            let y = random_vec(&mut rng, n) + &s * rng.gen_range(-1.0..2.0);
            buf.push(s, y);
        }
        let zeta = rng.gen_range(0.1..3.0);
        let zeta_c = rng.gen_range(0.1..3.0);
        let Ok((_, view)) = build_view(&buf, zeta, zeta_c, 1e-8) else {
            continue;
        };
        let g = random_vec(&mut rng, n);
        let delta = rng.gen_range(0.05..5.0);
        match solve_obs(&view, &g, delta) {
            Ok(sol) => {
                for v in optimality_violations(&view, &g, delta, &sol) {
                    failures.push(format!("case {case}: {v}"));
                }
            }
            Err(e) => failures.push(format!("case {case}: {e}")),
        }
    }
    CheckOutcome::new("subproblem optimality", failures, cases)
}

fn accounting_checks(n: usize) -> CheckOutcome {
    let mut failures = Vec::new();
    let mut total = 0;
    for p in suite(n).expect("check dimension is valid") {
        for solver in [SolverKind::Mss, SolverKind::Lsr1Bb] {
            total += 1;
            let cfg = TrConfig { solver, ..TrConfig::default() };
            match solve(&p, &cfg) {
                Ok(r) if r.fevals == r.gevals && r.fevals == r.iters + 1 => {}
                Ok(r) => failures.push(format!("{} {solver}: fevals {} gevals {} iters {}", p.name, r.fevals, r.gevals, r.iters)),
                Err(e) => failures.push(format!("{} {solver}: {e}", p.name)),
            }
        }
    }
    CheckOutcome::new("evaluation accounting", failures, total)
}

/// Runs every self-check with a fixed seed.
pub fn run_checks(seed: u64) -> Vec<CheckOutcome> {
    vec![
        gradient_checks(20, seed),
        secant_checks(200, seed.wrapping_add(1)),
        subproblem_checks(200, seed.wrapping_add(2)),
        accounting_checks(20),
    ]
}
