use densemss::compact::{build_view, sym_lower, PairBuffer};
use densemss::dense::{gram, ldlt_pivoted, sym_eig};
use densemss::init::{safeguard, SAFEGUARD_MAX, SAFEGUARD_MIN};
use densemss::subproblem::{cauchy_point, optimality_violations, solve_obs, solve_steihaug_cg};
use densemss::{choose_params, InitOption};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rvec(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
}

fn buffer(seed: u64, n: usize, l: usize, positive: bool) -> PairBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = PairBuffer::new(n, l);
    for _ in 0..l {
        let s = rvec(&mut rng, n) * rng.gen_range(0.01..10.0);
        let mut y = rvec(&mut rng, n) * s.norm() + &s * rng.gen_range(-1.0..3.0);
        if positive && y.dot(&s) <= 0.0 {
            y = -y;
        }
        buf.push(s, y);
    }
    buf
}

fn option() -> impl Strategy<Value = InitOption> {
    prop::sample::select(InitOption::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn newest_pair_is_reproduced(seed in any::<u64>(), n in 6usize..30, l in 1usize..6, opt in option()) {
        let buf = buffer(seed, n, l, true);
        let (z, zc) = choose_params(opt, &buf);
        let (_, view) = build_view(&buf, z, zc, 1e-8).unwrap();
        let (s, y) = buf.newest().unwrap();
        prop_assert!((view.apply_b(s) - y).norm() <= 1e-8 * y.norm());
        let sm = buf.s_matrix();
        let bs = DMatrix::from_fn(n, l, |i, j| view.apply_b(&sm.column(j).clone_owned())[i]);
        let target = sym_lower(&sm.tr_mul(&buf.y_matrix()));
        prop_assert!((sm.tr_mul(&bs) - &target).norm() <= 1e-8 * target.norm());
    }

    #[test]
    fn parameters_stay_in_the_safeguard_range(seed in any::<u64>(), n in 4usize..20, l in 1usize..6, opt in option()) {
        let buf = buffer(seed, n, l, false);
        let (z, zc) = choose_params(opt, &buf);
        for v in [z, zc] {
            prop_assert!((SAFEGUARD_MIN..=SAFEGUARD_MAX).contains(&v));
        }
    }

    #[test]
    fn safeguard_keeps_or_falls_back(c in -1e6f64..1e6, prev in 1e-4f64..1e4) {
        let v = safeguard(c, prev);
        prop_assert!(v == c || v == prev);
        prop_assert!((SAFEGUARD_MIN..=SAFEGUARD_MAX).contains(&v));
    }

    #[test]
    fn sym_eig_reconstructs(seed in any::<u64>(), k in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(k, k, |_, _| rng.gen_range(-1.0..1.0));
        let a = &x + x.transpose();
        let e = sym_eig(&a);
        let back = &e.u * DMatrix::from_diagonal(&e.lambda) * e.u.transpose();
        prop_assert!((back - &a).norm() <= 1e-12 * a.norm().max(1.0));
        prop_assert!((e.u.tr_mul(&e.u) - DMatrix::identity(k, k)).norm() <= 1e-12);
        prop_assert!(e.lambda.as_slice().windows(2).all(|w| w[0] <= w[1]));
        let mut oracle: Vec<f64> = SymmetricEigen::new(a.clone()).eigenvalues.iter().copied().collect();
        oracle.sort_by(f64::total_cmp);
        for (x, y) in e.lambda.iter().zip(&oracle) {
            prop_assert!((x - y).abs() <= 1e-11 * a.norm().max(1.0));
        }
    }

    #[test]
    fn ldlt_rank_matches_column_rank(seed in any::<u64>(), rows in 8usize..20, rank in 1usize..6, extra in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = DMatrix::from_fn(rows, rank, |_, _| rng.gen_range(-1.0..1.0));
        let mix = DMatrix::from_fn(rank, rank + extra, |_, _| rng.gen_range(-1.0..1.0));
        let x = basis * mix;
        let f = ldlt_pivoted(&gram(&x), 1e-10).unwrap();
        prop_assert_eq!(f.rank(), rank);
        let a = gram(&x);
        let permuted = DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(f.perm[i], f.perm[j])]);
        prop_assert!((f.reconstruct_permuted() - permuted).norm() <= 1e-9 * a.norm());
    }

    #[test]
    fn subproblem_solution_is_optimal(seed in any::<u64>(), n in 6usize..25, l in 1usize..4, delta in 0.01f64..10.0) {
        let buf = buffer(seed, n, l, false);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let (_, view) = build_view(&buf, rng.gen_range(0.1..3.0), rng.gen_range(0.1..3.0), 1e-8).unwrap();
        let g = rvec(&mut rng, n);
        let sol = solve_obs(&view, &g, delta).unwrap();
        let v = optimality_violations(&view, &g, delta, &sol);
        prop_assert!(v.is_empty(), "{:?}", v);
        // reported Bp matches the operator
        prop_assert!((view.apply_b(&sol.p) - &sol.bp).norm() <= 1e-9 * sol.bp.norm().max(1.0));

        let b = view.to_dense();
        let q = |p: &DVector<f64>| g.dot(p) + 0.5 * p.dot(&(&b * p));
        let pc = cauchy_point(&b, &g, delta);
        prop_assert!(pc.norm() <= delta * (1.0 + 1e-12));
        prop_assert!(q(&sol.p) <= q(&pc) + 1e-10 * q(&pc).abs().max(1.0));

        let cg = solve_steihaug_cg(|v| view.apply_b(v), &g, delta, 1e-10, 4 * n).unwrap();
        prop_assert!(cg.p.norm() <= delta * (1.0 + 1e-10));
        prop_assert!(q(&sol.p) <= q(&cg.p) + 1e-9 * q(&cg.p).abs().max(1.0));
    }
}
