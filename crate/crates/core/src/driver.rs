//! Trust-region drivers: the MSS method with dense initialization and an
//! L-SR1 baseline sharing the same radius management and stopping rules.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::compact::{build_view, sym_lower, AcceptanceRule, PairBuffer};
use crate::dense::{gram, sym_eig, DEFAULT_RANK_TOL};
use crate::error::SolveError;
use crate::init::{bb_ratio, safeguard, InitOption, InitState};
use crate::problems::Objective;
use crate::subproblem::{cauchy_fallback, solve_obs_seeded, solve_steihaug_cg};

/// SR1 pair acceptance threshold.
pub const SR1_SKIP_TOL: f64 = 1e-8;
/// Relative eigenvalue threshold below which the SR1 middle matrix counts as singular.
pub const SR1_SINGULAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SolverKind {
    #[serde(rename = "mss")]
    Mss,
    #[serde(rename = "lsr1-bb")]
    Lsr1Bb,
    #[serde(rename = "lsr1-id")]
    Lsr1Id,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Mss => "mss",
            SolverKind::Lsr1Bb => "lsr1-bb",
            SolverKind::Lsr1Id => "lsr1-id",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mss" => Ok(SolverKind::Mss),
            "lsr1-bb" => Ok(SolverKind::Lsr1Bb),
            "lsr1-id" => Ok(SolverKind::Lsr1Id),
            other => Err(format!("unknown solver '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    #[serde(rename = "converged")]
    Converged,
    #[serde(rename = "iter-limit")]
    IterLimit,
    #[serde(rename = "feval-limit")]
    FevalLimit,
    #[serde(rename = "delta-collapse")]
    DeltaCollapse,
    /// The run failed before producing a result (harness only).
    #[serde(rename = "error")]
    Error,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::IterLimit => "iter-limit",
            Status::FevalLimit => "feval-limit",
            Status::DeltaCollapse => "delta-collapse",
            Status::Error => "error",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Trust-region parameters. Defaults are the reference experiment settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrConfig {
    pub eta1: f64,
    pub eta2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma_p: f64,
    pub m: usize,
    pub option: InitOption,
    /// Cap on `cond(B)` before falling back to the Cauchy step.
    pub tau: f64,
    /// Cap on `‖B‖`.
    pub tau_hat: f64,
    pub tau_g: f64,
    /// Iteration budget is `iter_factor · n`.
    pub iter_factor: usize,
    /// Function-evaluation budget is `feval_factor · n`.
    pub feval_factor: usize,
    pub delta_min: f64,
    pub delta0: f64,
    pub solver: SolverKind,
    pub acceptance: AcceptanceRule,
    pub rank_tol: f64,
    pub record_history: bool,
    pub seed: u64,
}

impl Default for TrConfig {
    fn default() -> Self {
        Self {
            eta1: 0.01,
            eta2: 0.75,
            gamma1: 0.5,
            gamma2: 2.0,
            gamma_p: 0.8,
            m: 3,
            option: InitOption::HalfSumBb,
            tau: 1e12,
            tau_hat: 1e15,
            tau_g: 1e-5,
            iter_factor: 2,
            feval_factor: 100,
            delta_min: 100.0 * f64::EPSILON,
            delta0: 1.0,
            solver: SolverKind::Mss,
            acceptance: AcceptanceRule::MssPositive,
            rank_tol: DEFAULT_RANK_TOL,
            record_history: false,
            seed: 0,
        }
    }
}

impl TrConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        let bad = |msg: &str| Err(SolveError::InvalidConfig(msg.to_string()));
        if !(0.0 < self.eta1 && self.eta1 < self.eta2 && self.eta2 < 1.0) {
            return bad("need 0 < eta1 < eta2 < 1");
        }
        if !(0.0 < self.gamma1 && self.gamma1 < 1.0 && self.gamma2 > 1.0) {
            return bad("need 0 < gamma1 < 1 < gamma2");
        }
        if !(0.0 < self.gamma_p && self.gamma_p < 1.0) {
            return bad("need 0 < gamma_p < 1");
        }
        if self.m == 0 {
            return bad("memory m must be positive");
        }
        if !(self.delta0 > 0.0) || !(self.tau_g > 0.0) || !(self.rank_tol > 0.0) {
            return bad("delta0, tau_g and rank_tol must be positive");
        }
        Ok(())
    }

    pub fn max_iters(&self, n: usize) -> usize {
        self.iter_factor * n
    }

    pub fn max_fevals(&self, n: usize) -> usize {
        self.feval_factor * n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FallbackReason {
    /// First iteration, `B = I`.
    Initial,
    /// `cond(B) > τ` or `‖B‖ > τ̂`.
    Conditioning,
    /// The subproblem solver reported an error.
    SolverFailure,
}

/// One iteration of the trust-region loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    /// Objective at the current iterate before the step.
    pub f: f64,
    pub gnorm: f64,
    /// Radius used for the step.
    pub delta: f64,
    /// Radius after the update.
    pub delta_next: f64,
    pub rho: f64,
    pub accepted: bool,
    pub step_norm: f64,
    pub fallback: Option<FallbackReason>,
    pub cond: f64,
    pub bnorm: f64,
    pub pair_stored: bool,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: Status,
    pub iters: usize,
    pub fevals: usize,
    pub gevals: usize,
    pub final_gnorm: f64,
    pub final_f: f64,
    pub wall_ms: f64,
    pub fallback_steps: usize,
    pub x: DVector<f64>,
    pub history: Vec<IterRecord>,
}

/// Actual over predicted reduction. Returns `−∞` when the predicted
/// reduction is not meaningfully positive or `f_new` is not finite.
pub fn compute_rho(f_new: f64, f: f64, g: &DVector<f64>, p: &DVector<f64>, bp: &DVector<f64>) -> f64 {
    let pred = -g.dot(p) - 0.5 * p.dot(bp);
    let eps_den = 1e-16 * f.abs().max(1.0);
    if !f_new.is_finite() || !(pred > eps_den) {
        return f64::NEG_INFINITY;
    }
    (f - f_new) / pred
}

/// Current iterate of a trust-region run.
#[derive(Debug, Clone)]
pub struct TrState {
    pub x: DVector<f64>,
    pub f: f64,
    pub g: DVector<f64>,
    pub delta: f64,
}

/// Radius update. `g_new` is the gradient at `x + p`; it becomes the current
/// gradient when the step is accepted. Returns `(accepted, ρ)`.
pub fn update_radius(
    state: &mut TrState,
    f_new: f64,
    g_new: &DVector<f64>,
    p: &DVector<f64>,
    bp: &DVector<f64>,
    cfg: &TrConfig,
) -> (bool, f64) {
    let rho = compute_rho(f_new, state.f, &state.g, p, bp);
    if rho >= cfg.eta1 {
        state.x += p;
        state.f = f_new;
        state.g.copy_from(g_new);
        if rho >= cfg.eta2 && p.norm() > cfg.gamma_p * state.delta {
            state.delta *= cfg.gamma2;
        }
        (true, rho)
    } else {
        state.delta *= cfg.gamma1;
        (false, rho)
    }
}

/// Termination test; `None` means keep iterating.
pub fn check_termination(
    gnorm: f64,
    g0norm: f64,
    iters: usize,
    fevals: usize,
    delta: f64,
    n: usize,
    cfg: &TrConfig,
) -> Option<Status> {
    if gnorm <= (cfg.tau_g * g0norm).max(cfg.tau_g) {
        Some(Status::Converged)
    } else if iters >= cfg.max_iters(n) {
        Some(Status::IterLimit)
    } else if fevals >= cfg.max_fevals(n) {
        Some(Status::FevalLimit)
    } else if delta < cfg.delta_min {
        Some(Status::DeltaCollapse)
    } else {
        None
    }
}

struct Step {
    p: DVector<f64>,
    bp: DVector<f64>,
    fallback: Option<FallbackReason>,
    cond: f64,
    bnorm: f64,
}

trait QuasiNewtonModel {
    fn step(&mut self, g: &DVector<f64>, delta: f64) -> Step;
    /// Offers the pair from the latest trial point; returns whether it was stored.
    fn offer_pair(&mut self, s: &DVector<f64>, y: &DVector<f64>) -> bool;
}

struct MssModel<'c> {
    cfg: &'c TrConfig,
    buffer: PairBuffer,
    init: InitState,
}

impl QuasiNewtonModel for MssModel<'_> {
    fn step(&mut self, g: &DVector<f64>, delta: f64) -> Step {
        let n = g.len();
        let view = if self.buffer.is_empty() {
            crate::compact::SpectralView::empty(n, self.init.zeta_prev, self.init.zeta_c_prev)
        } else {
            let (zeta, zeta_c) = self.init.choose(&self.buffer);
            match build_view(&self.buffer, zeta, zeta_c, self.cfg.rank_tol) {
                Ok((_, view)) => view,
                Err(e) => {
                    warn!("compact build failed ({e}); using B = B0");
                    crate::compact::SpectralView::empty(n, zeta, zeta_c)
                }
            }
        };
        let (cond, bnorm) = view.cond_and_norm();
        if cond <= self.cfg.tau && bnorm <= self.cfg.tau_hat {
            match solve_obs_seeded(&view, g, delta, self.cfg.seed) {
                Ok(sol) => {
                    return Step { p: sol.p, bp: sol.bp, fallback: None, cond, bnorm };
                }
                Err(e) => {
                    warn!("subproblem solve failed ({e}); taking the Cauchy step");
                    let (p, bp) = cauchy_fallback(g, delta);
                    return Step { p, bp, fallback: Some(FallbackReason::SolverFailure), cond, bnorm };
                }
            }
        }
        debug!("cond(B) = {cond:e}, |B| = {bnorm:e}: Cauchy fallback");
        let (p, bp) = cauchy_fallback(g, delta);
        Step { p, bp, fallback: Some(FallbackReason::Conditioning), cond, bnorm }
    }

    fn offer_pair(&mut self, s: &DVector<f64>, y: &DVector<f64>) -> bool {
        self.buffer.try_accept(s, y, self.cfg.acceptance).unwrap_or(false)
    }
}

/// Compact L-SR1 matrix `γI + Ψ N⁻¹ Ψᵀ` with `Ψ = Y − γS`.
struct Sr1Matrix {
    gamma: f64,
    psi: DMatrix<f64>,
    n_inv: DMatrix<f64>,
}

impl Sr1Matrix {
    fn identity(n: usize, gamma: f64) -> Self {
        Self { gamma, psi: DMatrix::zeros(n, 0), n_inv: DMatrix::zeros(0, 0) }
    }

    /// `None` when the middle matrix is numerically singular.
    fn build(buffer: &PairBuffer, gamma: f64) -> Option<Self> {
        let n = buffer.dim();
        if buffer.is_empty() {
            return Some(Self::identity(n, gamma));
        }
        // oldest first
        let cols = buffer.len();
        let (s_new, y_new) = (buffer.s_matrix(), buffer.y_matrix());
        let s = DMatrix::from_fn(n, cols, |i, j| s_new[(i, cols - 1 - j)]);
        let y = DMatrix::from_fn(n, cols, |i, j| y_new[(i, cols - 1 - j)]);
        let middle = sym_lower(&s.tr_mul(&y)) - gram(&s) * gamma;
        let eig = sym_eig(&middle);
        let max_abs = eig.lambda.iter().fold(0.0_f64, |a, l| a.max(l.abs()));
        let min_abs = eig.lambda.iter().fold(f64::INFINITY, |a, l| a.min(l.abs()));
        if !(max_abs > 0.0) || min_abs < SR1_SINGULAR_TOL * max_abs {
            return None;
        }
        let inv_diag = DMatrix::from_diagonal(&eig.lambda.map(|l| 1.0 / l));
        let n_inv = &eig.u * inv_diag * eig.u.transpose();
        Some(Self { gamma, psi: y - s * gamma, n_inv })
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = v * self.gamma;
        if self.psi.ncols() > 0 {
            out += &self.psi * (&self.n_inv * self.psi.tr_mul(v));
        }
        out
    }
}

struct Sr1Model {
    identity_init: bool,
    buffer: PairBuffer,
    gamma: f64,
    current: Sr1Matrix,
}

impl Sr1Model {
    fn new(n: usize, m: usize, identity_init: bool) -> Self {
        Self {
            identity_init,
            buffer: PairBuffer::new(n, m),
            gamma: 1.0,
            current: Sr1Matrix::identity(n, 1.0),
        }
    }

    fn refresh(&mut self) {
        if !self.identity_init {
            if let Some((s, y)) = self.buffer.newest() {
                self.gamma = bb_ratio(s, y).map_or(self.gamma, |c| safeguard(c, self.gamma));
            }
        }
        self.current = Sr1Matrix::build(&self.buffer, self.gamma).unwrap_or_else(|| {
            debug!("SR1 middle matrix singular; skipping the update this iteration");
            Sr1Matrix::identity(self.buffer.dim(), self.gamma)
        });
    }
}

impl QuasiNewtonModel for Sr1Model {
    fn step(&mut self, g: &DVector<f64>, delta: f64) -> Step {
        let rtol = g.norm().sqrt().min(0.5);
        let model = &self.current;
        match solve_steihaug_cg(|v| model.apply(v), g, delta, rtol, g.len()) {
            Ok(sol) => Step { p: sol.p, bp: sol.bp, fallback: None, cond: f64::NAN, bnorm: f64::NAN },
            Err(e) => {
                warn!("truncated CG failed ({e}); taking the Cauchy step");
                let (p, bp) = cauchy_fallback(g, delta);
                Step { p, bp, fallback: Some(FallbackReason::SolverFailure), cond: f64::NAN, bnorm: f64::NAN }
            }
        }
    }

    fn offer_pair(&mut self, s: &DVector<f64>, y: &DVector<f64>) -> bool {
        if !y.iter().all(|v| v.is_finite()) || s.norm() == 0.0 {
            return false;
        }
        let r = y - self.current.apply(s);
        let stored = sr1_pair_acceptable(s, &r);
        if stored {
            let backup = self.buffer.clone();
            self.buffer.push(s.clone(), y.clone());
            let gamma = if self.identity_init {
                self.gamma
            } else {
                bb_ratio(s, y).map_or(self.gamma, |c| safeguard(c, self.gamma))
            };
            if Sr1Matrix::build(&self.buffer, gamma).is_none() {
                self.buffer = backup;
                self.refresh();
                return false;
            }
        }
        self.refresh();
        stored
    }
}

/// `|sᵀr| ≥ τ_s ‖r‖ ‖s‖` with `r = y − Bs`.
pub fn sr1_pair_acceptable(s: &DVector<f64>, r: &DVector<f64>) -> bool {
    let lhs = s.dot(r).abs();
    lhs > 0.0 && lhs >= SR1_SKIP_TOL * r.norm() * s.norm()
}

fn run_trust_region(
    problem: &dyn Objective,
    cfg: &TrConfig,
    model: &mut dyn QuasiNewtonModel,
) -> Result<SolveReport, SolveError> {
    cfg.validate()?;
    let n = problem.dim();
    if n == 0 {
        return Err(SolveError::EmptyProblem);
    }
    let start = Instant::now();
    let x0 = problem.start();
    let (f0, g0) = problem.value_and_gradient(&x0);
    if !f0.is_finite() || !g0.iter().all(|v| v.is_finite()) {
        return Err(SolveError::NonFiniteStart);
    }
    let g0norm = g0.norm();
    let mut state = TrState { x: x0, f: f0, g: g0, delta: cfg.delta0 };
    let mut fevals = 1;
    let mut gevals = 1;
    let mut iters = 0;
    let mut fallback_steps = 0;
    let mut history = Vec::new();

    let mut status = check_termination(g0norm, g0norm, iters, fevals, state.delta, n, cfg);
    while status.is_none() {
        let gnorm = state.g.norm();
        let step = if iters == 0 {
            let (p, bp) = cauchy_fallback(&state.g, state.delta);
            Step { p, bp, fallback: Some(FallbackReason::Initial), cond: 1.0, bnorm: 1.0 }
        } else {
            model.step(&state.g, state.delta)
        };
        if matches!(step.fallback, Some(FallbackReason::Conditioning | FallbackReason::SolverFailure)) {
            fallback_steps += 1;
        }

        let trial = &state.x + &step.p;
        let (f_new, g_new) = problem.value_and_gradient(&trial);
        fevals += 1;
        gevals += 1;
        iters += 1;

        let y = &g_new - &state.g;
        let pair_stored = step.p.norm() > 0.0 && model.offer_pair(&step.p, &y);

        let f_before = state.f;
        let delta_before = state.delta;
        let (accepted, rho) = update_radius(&mut state, f_new, &g_new, &step.p, &step.bp, cfg);
        if cfg.record_history {
            history.push(IterRecord {
                iter: iters,
                f: f_before,
                gnorm,
                delta: delta_before,
                delta_next: state.delta,
                rho,
                accepted,
                step_norm: step.p.norm(),
                fallback: step.fallback,
                cond: step.cond,
                bnorm: step.bnorm,
                pair_stored,
            });
        }
        status = check_termination(state.g.norm(), g0norm, iters, fevals, state.delta, n, cfg);
    }

    Ok(SolveReport {
        status: status.unwrap_or(Status::Error),
        iters,
        fevals,
        gevals,
        final_gnorm: state.g.norm(),
        final_f: state.f,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        fallback_steps,
        x: state.x,
        history,
    })
}

/// MSS trust-region method with the dense initialization.
pub fn mss_solve(problem: &dyn Objective, cfg: &TrConfig) -> Result<SolveReport, SolveError> {
    let mut model = MssModel {
        cfg,
        buffer: PairBuffer::new(problem.dim(), cfg.m.max(1)),
        init: InitState::new(cfg.option),
    };
    run_trust_region(problem, cfg, &mut model)
}

/// L-SR1 trust-region baseline with truncated CG subproblems.
pub fn lsr1_solve(problem: &dyn Objective, cfg: &TrConfig) -> Result<SolveReport, SolveError> {
    let identity_init = match cfg.solver {
        SolverKind::Lsr1Bb => false,
        SolverKind::Lsr1Id => true,
        SolverKind::Mss => {
            return Err(SolveError::InvalidConfig("lsr1_solve needs an lsr1 solver kind".into()));
        }
    };
    let mut model = Sr1Model::new(problem.dim(), cfg.m.max(1), identity_init);
    run_trust_region(problem, cfg, &mut model)
}

/// Dispatches on `cfg.solver`.
pub fn solve(problem: &dyn Objective, cfg: &TrConfig) -> Result<SolveReport, SolveError> {
    match cfg.solver {
        SolverKind::Mss => mss_solve(problem, cfg),
        SolverKind::Lsr1Bb | SolverKind::Lsr1Id => lsr1_solve(problem, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn rho_examples() {
        let g = v(&[-1.0]);
        let p = v(&[1.0]);
        let bp = v(&[1.0]);
        // predicted reduction: 1 - 0.5 = 0.5
        assert_eq!(compute_rho(0.5, 1.0, &g, &p, &bp), 1.0);
        assert!(compute_rho(1.5, 1.0, &g, &p, &bp) < 0.0);
        assert_eq!(compute_rho(0.5, 1.0, &g, &(-&p), &(-&bp)), f64::NEG_INFINITY);
        assert_eq!(compute_rho(f64::NAN, 1.0, &g, &p, &bp), f64::NEG_INFINITY);
    }

    fn state(delta: f64) -> TrState {
        TrState { x: v(&[0.0]), f: 1.0, g: v(&[-1.0]), delta }
    }

    #[test]
    fn radius_automaton() {
        let cfg = TrConfig::default();
        // predicted reduction for p = t, Bp = t: t - t²/2
        let run = |t: f64, actual: f64, delta: f64| {
            let mut st = state(delta);
            let p = v(&[t]);
            let pred = t - 0.5 * t * t;
            let out = update_radius(&mut st, 1.0 - actual * pred, &v(&[0.5]), &p, &p, &cfg);
            (out, st)
        };
        let ((acc, rho), st) = run(0.9, 0.005, 1.0);
        assert!(!acc && (rho - 0.005).abs() < 1e-12);
        assert_eq!(st.delta, 0.5);
        assert_eq!(st.x[0], 0.0);

        let ((acc, _), st) = run(0.9, 0.8, 1.0);
        assert!(acc);
        assert_eq!(st.delta, 2.0);
        assert_eq!(st.x[0], 0.9);
        assert_eq!(st.g[0], 0.5);

        let ((acc, _), st) = run(0.9, 0.5, 1.0);
        assert!(acc);
        assert_eq!(st.delta, 1.0);

        // very successful but short step: radius kept
        let ((acc, _), st) = run(0.5, 0.9, 1.0);
        assert!(acc);
        assert_eq!(st.delta, 1.0);
    }

    #[test]
    fn termination_examples() {
        let cfg = TrConfig::default();
        assert_eq!(check_termination(1e-6, 1.0, 0, 1, 1.0, 10, &cfg), Some(Status::Converged));
        assert_eq!(check_termination(1.0, 1.0, 3, 4, 1e-15, 10, &cfg), Some(Status::DeltaCollapse));
        assert_eq!(check_termination(1.0, 1.0, 20, 21, 1.0, 10, &cfg), Some(Status::IterLimit));
        assert_eq!(check_termination(1.0, 1.0, 5, 1000, 1.0, 10, &cfg), Some(Status::FevalLimit));
        assert_eq!(check_termination(1.0, 1.0, 5, 6, 1.0, 10, &cfg), None);
    }

    #[test]
    fn sr1_rule_rejects_exact_pairs() {
        let s = v(&[1.0, 2.0]);
        assert!(!sr1_pair_acceptable(&s, &DVector::zeros(2)));
        assert!(sr1_pair_acceptable(&s, &v(&[0.5, 0.1])));
    }

    #[test]
    fn config_validation() {
        assert!(TrConfig::default().validate().is_ok());
        let cfg = TrConfig { eta1: 0.9, ..TrConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = TrConfig { gamma1: 1.5, ..TrConfig::default() };
        assert!(cfg.validate().is_err());
    }
}
