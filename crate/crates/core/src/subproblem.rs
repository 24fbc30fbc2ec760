//! Euclidean trust-region subproblem solvers.
//!
//! [`solve_obs`] solves `min gᵀp + ½pᵀBp, ‖p‖ ≤ Δ` to high accuracy using the
//! implicit eigendecomposition held by a [`SpectralView`]. The step is
//! assembled from the coefficients `a = P∥ᵀg` and the orthogonal remainder
//! `g⊥ = g − P∥a`, so only two products with `P∥` are needed.
//!
//! [`solve_steihaug_cg`] is the truncated-CG solver used by the L-SR1
//! baseline, and [`cauchy_fallback`] the steepest-descent step taken when `B`
//! is too badly conditioned.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::compact::SpectralView;
use crate::error::SubproblemError;

/// Relative accuracy of `‖p(σ)‖ = Δ` on the boundary.
pub const SECULAR_TOL: f64 = 1e-10;
pub const NEWTON_MAX_ITERS: usize = 100;
const HARD_CASE_SEED: u64 = 0x05ee_d0b5;

#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemSolution {
    pub p: DVector<f64>,
    pub sigma: f64,
    /// `B p`.
    pub bp: DVector<f64>,
    pub on_boundary: bool,
    pub hard_case: bool,
    pub newton_iters: usize,
}

impl SubproblemSolution {
    /// Model value `gᵀp + ½pᵀBp`.
    pub fn model_value(&self, g: &DVector<f64>) -> f64 {
        g.dot(&self.p) + 0.5 * self.p.dot(&self.bp)
    }
}

/// Spectral data of the secular function `‖p(σ)‖`.
struct Secular<'a> {
    a2: &'a [f64],
    lambdas: &'a [f64],
    gperp2: f64,
    lambda_far: f64,
}

impl Secular<'_> {
    /// Returns `(Σ c/(λ+σ)², Σ c/(λ+σ)³)`.
    fn moments(&self, sigma: f64) -> (f64, f64) {
        let mut q2 = 0.0;
        let mut q3 = 0.0;
        for (&c, &lam) in self.a2.iter().zip(self.lambdas) {
            if c > 0.0 {
                let d = lam + sigma;
                q2 += c / (d * d);
                q3 += c / (d * d * d);
            }
        }
        if self.gperp2 > 0.0 {
            let d = self.lambda_far + sigma;
            q2 += self.gperp2 / (d * d);
            q3 += self.gperp2 / (d * d * d);
        }
        (q2, q3)
    }

    fn pnorm(&self, sigma: f64) -> f64 {
        self.moments(sigma).0.sqrt()
    }

    fn pole(&self) -> f64 {
        let mut lo = f64::INFINITY;
        for (&c, &lam) in self.a2.iter().zip(self.lambdas) {
            if c > 0.0 {
                lo = lo.min(lam);
            }
        }
        if self.gperp2 > 0.0 {
            lo = lo.min(self.lambda_far);
        }
        lo
    }
}

/// Newton's method on `ϕ(σ) = 1/‖p(σ)‖ − 1/Δ` started at `sigma0`.
///
/// `ϕ` is concave and increasing on `(−λ_min, ∞)`, so from any start with
/// `ϕ(σ₀) ≤ 0` the iterates increase monotonically to the root. Returns the
/// root and the number of iterations.
pub fn secular_newton(
    a2: &[f64],
    lambdas: &[f64],
    gperp2: f64,
    lambda_far: f64,
    delta: f64,
    sigma0: f64,
) -> Result<(f64, usize), SubproblemError> {
    if !(delta > 0.0) {
        return Err(SubproblemError::InvalidRadius(delta));
    }
    let sec = Secular { a2, lambdas, gperp2, lambda_far };
    let pole = sec.pole();
    if !pole.is_finite() {
        return Err(SubproblemError::BadStart("no nonzero gradient component".into()));
    }
    if !(sigma0 >= 0.0) || !(pole + sigma0 > 0.0) {
        return Err(SubproblemError::BadStart(format!(
            "sigma0 = {sigma0:e} does not exceed -lambda_min = {:e}",
            -pole
        )));
    }
    if sec.pnorm(sigma0) < delta * (1.0 - SECULAR_TOL) {
        return Err(SubproblemError::BadStart(format!(
            "phi(sigma0) > 0 at sigma0 = {sigma0:e}"
        )));
    }

    let mut sigma = sigma0;
    for iter in 0..NEWTON_MAX_ITERS {
        let (q2, q3) = sec.moments(sigma);
        let pn = q2.sqrt();
        if (pn - delta).abs() <= SECULAR_TOL * delta {
            return Ok((sigma, iter));
        }
        let phi = 1.0 / pn - 1.0 / delta;
        let dphi = q3 / (pn * q2);
        let next = sigma - phi / dphi;
        if !next.is_finite() || next <= -pole {
            break;
        }
        if next == sigma {
            // stalled at roundoff level
            if (pn - delta).abs() <= 1e3 * SECULAR_TOL * delta {
                return Ok((sigma, iter));
            }
            break;
        }
        sigma = next;
    }
    Err(SubproblemError::NewtonStalled {
        iters: NEWTON_MAX_ITERS,
        sigma,
        pnorm: sec.pnorm(sigma),
        delta,
    })
}

/// High-accuracy subproblem solve over a spectral view.
pub fn solve_obs(
    view: &SpectralView,
    g: &DVector<f64>,
    delta: f64,
) -> Result<SubproblemSolution, SubproblemError> {
    solve_obs_seeded(view, g, delta, HARD_CASE_SEED)
}

/// As [`solve_obs`], with an explicit seed for the hard-case vector drawn in
/// the complement of `range(P∥)`.
pub fn solve_obs_seeded(
    view: &SpectralView,
    g: &DVector<f64>,
    delta: f64,
    seed: u64,
) -> Result<SubproblemSolution, SubproblemError> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(SubproblemError::InvalidRadius(delta));
    }
    if g.len() != view.n {
        return Err(SubproblemError::Dimension { expected: view.n, got: g.len() });
    }
    if !g.iter().all(|v| v.is_finite()) {
        return Err(SubproblemError::NonFiniteGradient);
    }

    let r = view.rank();
    let has_far = view.far_multiplicity() > 0;
    let lam: Vec<f64> = view.parallel_eigenvalues().iter().cloned().collect();
    let a = if r > 0 { view.p.tr_mul(g) } else { DVector::zeros(0) };
    let gperp = if has_far { g - &view.p * &a } else { DVector::zeros(view.n) };
    let gperp2 = if has_far { gperp.norm_squared() } else { 0.0 };
    let a2: Vec<f64> = a.iter().map(|v| v * v).collect();
    let lam_far = view.zeta_c;

    let lam_min = view.lambda_min();
    let scale = lam.iter().fold(lam_far.abs(), |acc, l| acc.max(l.abs())).max(1.0);
    let cluster_tol = 1e-10 * scale;
    let in_cluster = |l: f64| l - lam_min <= cluster_tol;
    let far_in_cluster = has_far && in_cluster(lam_far);

    let sec = Secular { a2: &a2, lambdas: &lam, gperp2, lambda_far: lam_far };
    let assemble = |sigma: f64| -> DVector<f64> {
        let mut p = if has_far { &gperp * (-1.0 / (lam_far + sigma)) } else { DVector::zeros(view.n) };
        if r > 0 {
            let coef = DVector::from_iterator(r, a.iter().zip(&lam).map(|(ai, li)| -ai / (li + sigma)));
            p += &view.p * coef;
        }
        p
    };

    // interior Newton step
    if lam_min > 0.0 && sec.pnorm(0.0) <= delta {
        let p = assemble(0.0);
        return Ok(SubproblemSolution {
            p,
            sigma: 0.0,
            bp: -g,
            on_boundary: false,
            hard_case: false,
            newton_iters: 0,
        });
    }

    let gnorm = g.norm();
    let mut a_min2: f64 = a2.iter().zip(&lam).filter(|(_, &l)| in_cluster(l)).map(|(c, _)| c).sum();
    if far_in_cluster {
        a_min2 += gperp2;
    }
    let lo = (-lam_min).max(0.0);

    let hard_threshold = 1e-10 * gnorm;
    if lam_min <= 0.0 && a_min2.sqrt() <= hard_threshold {
        // gradient has no weight on the leftmost eigenspace
        let mut p_hat = if has_far && !far_in_cluster {
            &gperp * (-1.0 / (lam_far - lam_min))
        } else {
            DVector::zeros(view.n)
        };
        if r > 0 {
            let coef = DVector::from_iterator(
                r,
                a.iter().zip(&lam).map(|(ai, &li)| if in_cluster(li) { 0.0 } else { -ai / (li - lam_min) }),
            );
            p_hat += &view.p * coef;
        }
        let phat_norm = p_hat.norm();
        if phat_norm <= delta {
            let sigma = lo;
            let alpha = (delta * delta - phat_norm * phat_norm).max(0.0).sqrt();
            let z = leftmost_eigenvector(view, &lam, &in_cluster, seed);
            let p = p_hat + z * alpha;
            let bp = if alpha > 0.0 { view.apply_b(&p) } else { -g - &p * sigma };
            return Ok(SubproblemSolution {
                p,
                sigma,
                bp,
                on_boundary: alpha > 0.0 || phat_norm >= delta * (1.0 - SECULAR_TOL),
                hard_case: true,
                newton_iters: 0,
            });
        }
    }

    // boundary solution: find a start with ϕ(σ₀) ≤ 0, then Newton
    let hi = gnorm / delta - lam_min;
    let mut sigma0 = if a_min2 > 0.0 { (a_min2.sqrt() / delta - lam_min).max(lo) } else { hi.max(lo) };
    let pole = sec.pole();
    let floor = lo.max(-pole);
    if sigma0 <= floor {
        sigma0 = floor + f64::EPSILON * floor.abs().max(1.0);
    }
    let mut tries = 0;
    while sec.pnorm(sigma0) < delta && tries < 200 {
        sigma0 = 0.5 * (sigma0 + floor);
        if sigma0 <= floor {
            break;
        }
        tries += 1;
    }
    let (sigma, newton_iters) = secular_newton(&a2, &lam, gperp2, lam_far, delta, sigma0)?;
    let p = assemble(sigma);
    let bp = -g - &p * sigma;
    Ok(SubproblemSolution {
        p,
        sigma,
        bp,
        on_boundary: true,
        hard_case: false,
        newton_iters,
    })
}

fn leftmost_eigenvector(
    view: &SpectralView,
    lam: &[f64],
    in_cluster: &impl Fn(f64) -> bool,
    seed: u64,
) -> DVector<f64> {
    if let Some(i) = lam.iter().position(|&l| in_cluster(l)) {
        return view.p.column(i).clone_owned();
    }
    // λ_min = ζᶜ: any unit vector orthogonal to P∥
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = DVector::from_fn(view.n, |_, _| rng.gen_range(-1.0..1.0));
    for _ in 0..2 {
        if view.rank() > 0 {
            let c = view.p.tr_mul(&z);
            z -= &view.p * c;
        }
    }
    let nz = z.norm();
    z / nz
}

/// Steepest-descent step of length `min(‖g‖, Δ)` with `B = I`.
pub fn cauchy_fallback(g: &DVector<f64>, delta: f64) -> (DVector<f64>, DVector<f64>) {
    let gnorm = g.norm();
    let beta = (gnorm / delta).min(1.0);
    let p = g * (-(beta * delta) / gnorm);
    let bp = p.clone();
    (p, bp)
}

/// Dense Cauchy point for `(B, g, Δ)`: the model minimizer along `−g`.
pub fn cauchy_point(b: &DMatrix<f64>, g: &DVector<f64>, delta: f64) -> DVector<f64> {
    let gnorm = g.norm();
    if gnorm == 0.0 {
        return DVector::zeros(g.len());
    }
    let gbg = g.dot(&(b * g));
    let tau = if gbg <= 0.0 { 1.0 } else { (gnorm.powi(3) / (delta * gbg)).min(1.0) };
    g * (-tau * delta / gnorm)
}

/// Checks the global optimality conditions of a subproblem solution.
/// Returns one message per violated condition.
pub fn optimality_violations(
    view: &SpectralView,
    g: &DVector<f64>,
    delta: f64,
    sol: &SubproblemSolution,
) -> Vec<String> {
    let mut out = Vec::new();
    let pn = sol.p.norm();
    if pn > delta * (1.0 + 1e-8) {
        out.push(format!("step outside region: |p| = {pn:e}, delta = {delta:e}"));
    }
    let bp = view.apply_b(&sol.p);
    let res = (&bp + &sol.p * sol.sigma + g).norm();
    if res > 1e-7 * g.norm().max(1.0) {
        out.push(format!("stationarity residual {res:e}"));
    }
    let comp = (sol.sigma * (delta - pn)).abs();
    if comp > 1e-6 * delta * sol.sigma.max(1.0) {
        out.push(format!("complementarity {comp:e}"));
    }
    let (_, bnorm) = view.cond_and_norm();
    let curv = view.lambda_min() + sol.sigma;
    if curv < -1e-8 * bnorm.max(1.0) {
        out.push(format!("lambda_min + sigma = {curv:e}"));
    }
    if sol.sigma < 0.0 {
        out.push(format!("negative multiplier {:e}", sol.sigma));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CgStatus {
    /// Interior point with a small residual.
    Converged,
    /// Stopped on the boundary along a direction of nonpositive curvature.
    NegativeCurvature,
    /// The next iterate would have left the trust region.
    Boundary,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct CgSolution {
    pub p: DVector<f64>,
    pub bp: DVector<f64>,
    pub status: CgStatus,
    pub iters: usize,
}

fn boundary_tau(p: &DVector<f64>, d: &DVector<f64>, delta: f64) -> f64 {
    let dd = d.norm_squared();
    let pd = p.dot(d);
    let pp = p.norm_squared();
    let disc = (pd * pd + dd * (delta * delta - pp)).max(0.0);
    (-pd + disc.sqrt()) / dd
}

/// Steihaug–Toint truncated conjugate gradient.
pub fn solve_steihaug_cg(
    apply_b: impl Fn(&DVector<f64>) -> DVector<f64>,
    g: &DVector<f64>,
    delta: f64,
    rtol: f64,
    maxit: usize,
) -> Result<CgSolution, SubproblemError> {
    if !(delta > 0.0) {
        return Err(SubproblemError::InvalidRadius(delta));
    }
    if !g.iter().all(|v| v.is_finite()) {
        return Err(SubproblemError::NonFiniteGradient);
    }
    let n = g.len();
    let mut p = DVector::zeros(n);
    let mut bp = DVector::zeros(n);
    let mut r = g.clone();
    let target = rtol * g.norm();
    if r.norm() <= target {
        return Ok(CgSolution { p, bp, status: CgStatus::Converged, iters: 0 });
    }
    let mut d = -&r;
    let mut rr = r.norm_squared();
    for iter in 0..maxit {
        let bd = apply_b(&d);
        let dbd = d.dot(&bd);
        if dbd <= 0.0 {
            let tau = boundary_tau(&p, &d, delta);
            p.axpy(tau, &d, 1.0);
            bp.axpy(tau, &bd, 1.0);
            return Ok(CgSolution { p, bp, status: CgStatus::NegativeCurvature, iters: iter + 1 });
        }
        let alpha = rr / dbd;
        let trial = &p + &d * alpha;
        if trial.norm() >= delta {
            let tau = boundary_tau(&p, &d, delta);
            p.axpy(tau, &d, 1.0);
            bp.axpy(tau, &bd, 1.0);
            return Ok(CgSolution { p, bp, status: CgStatus::Boundary, iters: iter + 1 });
        }
        p = trial;
        bp.axpy(alpha, &bd, 1.0);
        r.axpy(alpha, &bd, 1.0);
        let rr_new = r.norm_squared();
        if rr_new.sqrt() <= target {
            return Ok(CgSolution { p, bp, status: CgStatus::Converged, iters: iter + 1 });
        }
        let beta = rr_new / rr;
        rr = rr_new;
        d = &d * beta - &r;
    }
    Ok(CgSolution { p, bp, status: CgStatus::MaxIterations, iters: maxit })
}
