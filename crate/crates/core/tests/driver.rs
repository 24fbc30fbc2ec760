use densemss::driver::FallbackReason;
use densemss::problems::FnObjective;
use densemss::{problem, solve, InitOption, SolveReport, SolverKind, Status, TrConfig};
use nalgebra::DVector;

fn half_norm(n: usize) -> FnObjective<impl Fn(&DVector<f64>) -> (f64, DVector<f64>) + Sync> {
    let mut x0 = DVector::zeros(n);
    x0[0] = 10.0;
    FnObjective::new(x0, |x: &DVector<f64>| (0.5 * x.norm_squared(), x.clone()))
}

fn traced(solver: SolverKind) -> TrConfig {
    TrConfig { solver, record_history: true, ..TrConfig::default() }
}

fn replay_radius(report: &SolveReport, cfg: &TrConfig) {
    for rec in &report.history {
        let expected = if rec.rho < cfg.eta1 {
            cfg.gamma1 * rec.delta
        } else if rec.rho >= cfg.eta2 && rec.step_norm > cfg.gamma_p * rec.delta {
            cfg.gamma2 * rec.delta
        } else {
            rec.delta
        };
        assert_eq!(rec.accepted, rec.rho >= cfg.eta1, "iter {}", rec.iter);
        assert!((rec.delta_next - expected).abs() <= 1e-15 * expected, "iter {}", rec.iter);
    }
    for w in report.history.windows(2) {
        assert_eq!(w[1].delta, w[0].delta_next);
    }
}

#[test]
fn quadratic_converges_fast_with_exact_model_agreement() {
    let p = half_norm(50);
    let cfg = traced(SolverKind::Mss);
    let r = solve(&p, &cfg).unwrap();
    assert_eq!(r.status, Status::Converged);
    assert!(r.iters <= 15, "{} iterations", r.iters);
    assert!(r.final_gnorm <= 1e-5 * 10.0);
    let fs: Vec<f64> = r.history.iter().map(|h| h.f).collect();
    assert!(fs.windows(2).all(|w| w[1] <= w[0]));
    // after the first pair the model is exact along the step
    for h in r.history.iter().skip(1).filter(|h| h.step_norm > 1e-6) {
        assert!((h.rho - 1.0).abs() < 1e-6, "iter {} rho {}", h.iter, h.rho);
    }
    replay_radius(&r, &cfg);
}

#[test]
fn first_step_is_the_initial_fallback() {
    let p = problem("ext-rosenbrock", 100).unwrap();
    let r = solve(&p, &traced(SolverKind::Mss)).unwrap();
    assert_eq!(r.history[0].fallback, Some(FallbackReason::Initial));
    assert!(r.history[0].step_norm <= r.history[0].delta * (1.0 + 1e-12));
}

#[test]
fn rosenbrock_1000_converges_for_every_option() {
    let p = problem("ext-rosenbrock", 1000).unwrap();
    for option in InitOption::ALL {
        let cfg = TrConfig { option, ..TrConfig::default() };
        let r = solve(&p, &cfg).unwrap();
        assert_eq!(r.status, Status::Converged, "{option}");
        assert!(r.final_f < 1e-3, "{option}: f = {}", r.final_f);
    }
}

#[test]
fn stationary_start_stops_immediately() {
    let p = FnObjective::new(DVector::from_element(8, 3.0), |x: &DVector<f64>| (1.0, DVector::zeros(x.len())));
    for solver in [SolverKind::Mss, SolverKind::Lsr1Bb, SolverKind::Lsr1Id] {
        let r = solve(&p, &TrConfig { solver, ..TrConfig::default() }).unwrap();
        assert_eq!(r.status, Status::Converged);
        assert_eq!(r.iters, 0);
        assert_eq!((r.fevals, r.gevals), (1, 1));
    }
}

#[test]
fn history_invariants_hold_on_the_suite() {
    for p in densemss::suite(40).unwrap() {
        for solver in [SolverKind::Mss, SolverKind::Lsr1Bb] {
            let cfg = traced(solver);
            let r = solve(&p, &cfg).unwrap();
            assert_eq!(r.fevals, r.gevals, "{}", p.name);
            assert_eq!(r.fevals, r.iters + 1, "{}", p.name);
            assert_eq!(r.history.len(), r.iters);
            replay_radius(&r, &cfg);
            let mut f = f64::INFINITY;
            for h in &r.history {
                assert!(h.f <= f, "{} {solver}: f rose at iter {}", p.name, h.iter);
                f = h.f;
            }
            for h in r.history.iter().filter(|h| h.fallback == Some(FallbackReason::Conditioning)) {
                assert!(h.cond > cfg.tau || h.bnorm > cfg.tau_hat, "{} iter {}", p.name, h.iter);
            }
            // the scheduled first step is not a fallback from a failed gate
            let counted = r
                .history
                .iter()
                .filter(|h| matches!(h.fallback, Some(FallbackReason::Conditioning | FallbackReason::SolverFailure)))
                .count();
            assert_eq!(counted, r.fallback_steps);
        }
    }
}

#[test]
fn lsr1_solves_the_quadratic() {
    for solver in [SolverKind::Lsr1Bb, SolverKind::Lsr1Id] {
        let r = solve(&half_norm(50), &traced(solver)).unwrap();
        assert_eq!(r.status, Status::Converged, "{solver}");
        assert!(r.iters <= 30);
    }
}

#[test]
fn lsr1_terminates_on_large_rosenbrock() {
    let p = problem("ext-rosenbrock", 1000).unwrap();
    let cfg = TrConfig { solver: SolverKind::Lsr1Bb, m: 5, ..TrConfig::default() };
    let r = solve(&p, &cfg).unwrap();
    assert!(r.iters <= cfg.max_iters(1000));
    assert_eq!(r.status, Status::Converged);
}

#[test]
fn non_finite_start_is_an_error() {
    let p = FnObjective::new(DVector::zeros(4), |x: &DVector<f64>| (f64::NAN, x.clone()));
    assert!(solve(&p, &TrConfig::default()).is_err());
    let p = FnObjective::new(DVector::zeros(4), |x: &DVector<f64>| (0.0, x.map(|_| f64::INFINITY)));
    assert!(solve(&p, &TrConfig::default()).is_err());
}

#[test]
fn invalid_config_is_rejected() {
    let p = half_norm(4);
    let cfg = TrConfig { m: 0, ..TrConfig::default() };
    assert!(solve(&p, &cfg).is_err());
    let cfg = TrConfig { eta1: 0.9, eta2: 0.5, ..TrConfig::default() };
    assert!(solve(&p, &cfg).is_err());
}
