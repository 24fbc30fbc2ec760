//! Scalable unconstrained test problems with analytic gradients.
//!
//! Every problem is defined for any `n ≥ 4` divisible by four, so block
//! problems in pairs or quadruples tile the whole vector.

use nalgebra::DVector;

use crate::error::ProblemError;

/// A smooth objective. Evaluation must be re-entrant.
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    fn start(&self) -> DVector<f64>;
    fn value_and_gradient(&self, x: &DVector<f64>) -> (f64, DVector<f64>);

    fn value(&self, x: &DVector<f64>) -> f64 {
        self.value_and_gradient(x).0
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.value_and_gradient(x).1
    }
}

/// Objective built from a closure returning `(f, ∇f)`.
pub struct FnObjective<F> {
    pub x0: DVector<f64>,
    pub eval: F,
}

impl<F> FnObjective<F>
where
    F: Fn(&DVector<f64>) -> (f64, DVector<f64>) + Sync,
{
    pub fn new(x0: DVector<f64>, eval: F) -> Self {
        Self { x0, eval }
    }
}

impl<F> Objective for FnObjective<F>
where
    F: Fn(&DVector<f64>) -> (f64, DVector<f64>) + Sync,
{
    fn dim(&self) -> usize {
        self.x0.len()
    }

    fn start(&self) -> DVector<f64> {
        self.x0.clone()
    }

    fn value_and_gradient(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        (self.eval)(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Kind {
    ExtRosenbrock,
    ExtPowell,
    ExtFreudensteinRoth,
    ExtBeale,
    ExtHimmelblau,
    ExtWood,
    ExtPsc1,
    ExtTridiag1,
    DixonPrice,
    Dqrtic,
    Trigonometric,
    BroydenTridiagonal,
    BroydenBanded,
    Penalty1,
    QuadraticSpread,
    QuadraticIll,
    Arwhead,
    Nondia,
    Engval1,
    DoubleWell,
    PerturbedQuadratic,
    Raydan1,
    Cosine,
    Liarwhd,
    ChainedRosenbrock,
    ChainedWood,
    ScaledRosenbrock,
    DiscreteBv,
    SumQuartics,
}

const KINDS: [(&str, Kind); 29] = [
    ("ext-rosenbrock", Kind::ExtRosenbrock),
    ("ext-powell", Kind::ExtPowell),
    ("ext-freudenstein-roth", Kind::ExtFreudensteinRoth),
    ("ext-beale", Kind::ExtBeale),
    ("ext-himmelblau", Kind::ExtHimmelblau),
    ("ext-wood", Kind::ExtWood),
    ("ext-psc1", Kind::ExtPsc1),
    ("ext-tridiag1", Kind::ExtTridiag1),
    ("dixon-price", Kind::DixonPrice),
    ("dqrtic", Kind::Dqrtic),
    ("trigonometric", Kind::Trigonometric),
    ("broyden-tridiagonal", Kind::BroydenTridiagonal),
    ("broyden-banded", Kind::BroydenBanded),
    ("penalty1", Kind::Penalty1),
    ("quadratic-spread", Kind::QuadraticSpread),
    ("quadratic-ill", Kind::QuadraticIll),
    ("arwhead", Kind::Arwhead),
    ("nondia", Kind::Nondia),
    ("engval1", Kind::Engval1),
    ("double-well", Kind::DoubleWell),
    ("perturbed-quadratic", Kind::PerturbedQuadratic),
    ("raydan1", Kind::Raydan1),
    ("cosine", Kind::Cosine),
    ("liarwhd", Kind::Liarwhd),
    ("chained-rosenbrock", Kind::ChainedRosenbrock),
    ("chained-wood", Kind::ChainedWood),
    ("scaled-rosenbrock", Kind::ScaledRosenbrock),
    ("discrete-bv", Kind::DiscreteBv),
    ("sum-quartics", Kind::SumQuartics),
];

/// Names of all suite problems in suite order.
pub fn problem_names() -> impl Iterator<Item = &'static str> {
    KINDS.iter().map(|(name, _)| *name)
}

/// A named test problem at a fixed dimension.
#[derive(Debug, Clone)]
pub struct ProblemDef {
    pub name: &'static str,
    pub n: usize,
    pub x0: DVector<f64>,
    kind: Kind,
}

fn check_dim(n: usize) -> Result<(), ProblemError> {
    if n < 4 || !n.is_multiple_of(4) {
        return Err(ProblemError::InvalidDimension(n));
    }
    Ok(())
}

/// Looks a problem up by name.
pub fn problem(name: &str, n: usize) -> Result<ProblemDef, ProblemError> {
    check_dim(n)?;
    let (name, kind) = KINDS
        .iter()
        .find(|(k, _)| *k == name)
        .copied()
        .ok_or_else(|| ProblemError::UnknownProblem(name.to_string()))?;
    Ok(ProblemDef { name, n, x0: start_point(kind, n), kind })
}

/// The full suite at dimension `n`.
pub fn suite(n: usize) -> Result<Vec<ProblemDef>, ProblemError> {
    check_dim(n)?;
    Ok(KINDS
        .iter()
        .map(|&(name, kind)| ProblemDef { name, n, x0: start_point(kind, n), kind })
        .collect())
}

fn alternating(n: usize, a: f64, b: f64) -> DVector<f64> {
    DVector::from_fn(n, |i, _| if i % 2 == 0 { a } else { b })
}

fn blocks4(n: usize, v: [f64; 4]) -> DVector<f64> {
    DVector::from_fn(n, |i, _| v[i % 4])
}

fn start_point(kind: Kind, n: usize) -> DVector<f64> {
    match kind {
        Kind::ExtRosenbrock | Kind::ChainedRosenbrock => alternating(n, -1.2, 1.0),
        Kind::ExtPowell => blocks4(n, [3.0, -1.0, 0.0, 1.0]),
        Kind::ExtFreudensteinRoth => alternating(n, 0.5, -2.0),
        Kind::ExtBeale => alternating(n, 1.0, 0.8),
        Kind::ExtHimmelblau => DVector::from_element(n, 1.0),
        Kind::ExtWood | Kind::ChainedWood => blocks4(n, [-3.0, -1.0, -3.0, -1.0]),
        Kind::ScaledRosenbrock => alternating(n, -1.2, 1.0).component_div(&rosen_scale(n)),
        Kind::DiscreteBv => {
            let h = 1.0 / (n as f64 + 1.0);
            DVector::from_fn(n, |i, _| {
                let t = (i + 1) as f64 * h;
                t * (t - 1.0)
            })
        }
        Kind::SumQuartics => DVector::from_element(n, 1.0),
        Kind::ExtPsc1 => alternating(n, 3.0, 0.1),
        Kind::ExtTridiag1 | Kind::Dqrtic | Kind::Engval1 => DVector::from_element(n, 2.0),
        Kind::DixonPrice | Kind::QuadraticSpread => DVector::from_element(n, 1.0),
        // equal energy per coordinate keeps f moderate despite the spread
        Kind::QuadraticIll => DVector::from_fn(n, |i, _| log_spaced(i, n, 6.0).sqrt().recip()),
        Kind::Trigonometric => DVector::from_element(n, 1.0 / n as f64),
        Kind::BroydenTridiagonal | Kind::BroydenBanded | Kind::Nondia => DVector::from_element(n, -1.0),
        Kind::Penalty1 => DVector::from_fn(n, |i, _| i as f64 + 1.0),
        Kind::Arwhead | Kind::Raydan1 | Kind::Cosine => DVector::from_element(n, 1.0),
        Kind::DoubleWell => DVector::from_fn(n, |i, _| 0.2 * (i as f64).cos()),
        Kind::PerturbedQuadratic => DVector::from_element(n, 0.5),
        Kind::Liarwhd => DVector::from_element(n, 4.0),
    }
}

/// Variable scaling in `[0.1, 10]` for the scaled Rosenbrock function.
fn rosen_scale(n: usize) -> DVector<f64> {
    DVector::from_fn(n, |i, _| 0.1 * log_spaced(i, n, 2.0))
}

/// `d_i = 10^(e·i/(n−1))`, so the condition number is `10^e`.
fn log_spaced(i: usize, n: usize, decades: f64) -> f64 {
    10f64.powf(decades * i as f64 / (n as f64 - 1.0))
}

fn eval(kind: Kind, x: &DVector<f64>) -> (f64, DVector<f64>) {
    let n = x.len();
    let mut g = DVector::zeros(n);
    let mut f = 0.0;
    match kind {
        Kind::ExtRosenbrock => {
            for i in (0..n).step_by(2) {
                let (a, b) = (x[i], x[i + 1]);
                let t = b - a * a;
                f += 100.0 * t * t + (1.0 - a) * (1.0 - a);
                g[i] = -400.0 * a * t - 2.0 * (1.0 - a);
                g[i + 1] = 200.0 * t;
            }
        }
        Kind::ExtPowell => {
            for i in (0..n).step_by(4) {
                let (a, b, c, d) = (x[i], x[i + 1], x[i + 2], x[i + 3]);
                let (u, v, w, z) = (a + 10.0 * b, c - d, b - 2.0 * c, a - d);
                f += u * u + 5.0 * v * v + w.powi(4) + 10.0 * z.powi(4);
                g[i] = 2.0 * u + 40.0 * z.powi(3);
                g[i + 1] = 20.0 * u + 4.0 * w.powi(3);
                g[i + 2] = 10.0 * v - 8.0 * w.powi(3);
                g[i + 3] = -10.0 * v - 40.0 * z.powi(3);
            }
        }
        Kind::ExtFreudensteinRoth => {
            for i in (0..n).step_by(2) {
                let (a, b) = (x[i], x[i + 1]);
                let r1 = -13.0 + a + ((5.0 - b) * b - 2.0) * b;
                let r2 = -29.0 + a + ((b + 1.0) * b - 14.0) * b;
                f += r1 * r1 + r2 * r2;
                g[i] = 2.0 * (r1 + r2);
                g[i + 1] = 2.0 * r1 * (10.0 * b - 3.0 * b * b - 2.0) + 2.0 * r2 * (3.0 * b * b + 2.0 * b - 14.0);
            }
        }
        Kind::ExtBeale => {
            const C: [f64; 3] = [1.5, 2.25, 2.625];
            for i in (0..n).step_by(2) {
                let (a, b) = (x[i], x[i + 1]);
                for (j, c) in C.iter().enumerate() {
                    let p = (j + 1) as i32;
                    let r = c - a * (1.0 - b.powi(p));
                    f += r * r;
                    g[i] -= 2.0 * r * (1.0 - b.powi(p));
                    g[i + 1] += 2.0 * r * a * p as f64 * b.powi(p - 1);
                }
            }
        }
        Kind::ExtHimmelblau => {
            for i in (0..n).step_by(2) {
                let (a, b) = (x[i], x[i + 1]);
                let r1 = a * a + b - 11.0;
                let r2 = a + b * b - 7.0;
                f += r1 * r1 + r2 * r2;
                g[i] = 4.0 * r1 * a + 2.0 * r2;
                g[i + 1] = 2.0 * r1 + 4.0 * r2 * b;
            }
        }
        Kind::ExtWood => {
            for i in (0..n).step_by(4) {
                let (a, b, c, d) = (x[i], x[i + 1], x[i + 2], x[i + 3]);
                let (t1, t2) = (a * a - b, c * c - d);
                f += 100.0 * t1 * t1
                    + (a - 1.0).powi(2)
                    + 90.0 * t2 * t2
                    + (c - 1.0).powi(2)
                    + 10.1 * ((b - 1.0).powi(2) + (d - 1.0).powi(2))
                    + 19.8 * (b - 1.0) * (d - 1.0);
                g[i] = 400.0 * a * t1 + 2.0 * (a - 1.0);
                g[i + 1] = -200.0 * t1 + 20.2 * (b - 1.0) + 19.8 * (d - 1.0);
                g[i + 2] = 360.0 * c * t2 + 2.0 * (c - 1.0);
                g[i + 3] = -180.0 * t2 + 20.2 * (d - 1.0) + 19.8 * (b - 1.0);
            }
        }
        Kind::ExtPsc1 => {
            for i in (0..n).step_by(2) {
                let (a, b) = (x[i], x[i + 1]);
                let q = a * a + b * b + a * b;
                f += q * q + a.sin().powi(2) + b.cos().powi(2);
                g[i] = 2.0 * q * (2.0 * a + b) + (2.0 * a).sin();
                g[i + 1] = 2.0 * q * (2.0 * b + a) - (2.0 * b).sin();
            }
        }
        Kind::ExtTridiag1 => {
            for i in (0..n).step_by(2) {
                let (a, b) = (x[i], x[i + 1]);
                let (u, v) = (a + b - 3.0, a - b + 1.0);
                f += u * u + v.powi(4);
                g[i] = 2.0 * u + 4.0 * v.powi(3);
                g[i + 1] = 2.0 * u - 4.0 * v.powi(3);
            }
        }
        Kind::DixonPrice => {
            f = (x[0] - 1.0).powi(2);
            g[0] = 2.0 * (x[0] - 1.0);
            for i in 1..n {
                let w = (i + 1) as f64;
                let t = 2.0 * x[i] * x[i] - x[i - 1];
                f += w * t * t;
                g[i] += 8.0 * w * t * x[i];
                g[i - 1] -= 2.0 * w * t;
            }
        }
        Kind::Dqrtic => {
            for i in 0..n {
                let e = x[i] - (i + 1) as f64;
                f += e.powi(4);
                g[i] = 4.0 * e.powi(3);
            }
        }
        Kind::Trigonometric => {
            let nf = n as f64;
            let csum: f64 = x.iter().map(|v| v.cos()).sum();
            let mut rsum = 0.0;
            let mut r = vec![0.0; n];
            for i in 0..n {
                r[i] = nf - csum + (i + 1) as f64 * (1.0 - x[i].cos()) - x[i].sin();
                f += r[i] * r[i];
                rsum += r[i];
            }
            for j in 0..n {
                let own = (j + 1) as f64 * x[j].sin() - x[j].cos();
                g[j] = 2.0 * x[j].sin() * rsum + 2.0 * r[j] * own;
            }
        }
        Kind::BroydenTridiagonal => {
            for i in 0..n {
                let prev = if i > 0 { x[i - 1] } else { 0.0 };
                let next = if i + 1 < n { x[i + 1] } else { 0.0 };
                let r = (3.0 - 2.0 * x[i]) * x[i] - prev - 2.0 * next + 1.0;
                f += r * r;
                g[i] += 2.0 * r * (3.0 - 4.0 * x[i]);
                if i > 0 {
                    g[i - 1] -= 2.0 * r;
                }
                if i + 1 < n {
                    g[i + 1] -= 4.0 * r;
                }
            }
        }
        Kind::BroydenBanded => {
            // r_i = x_i(2 + 5x_i²) + 1 − Σ_{j ∈ J_i} x_j(1 + x_j), J_i = [i−5, i+1] \ {i}
            for i in 0..n {
                let lo = i.saturating_sub(5);
                let hi = (i + 1).min(n - 1);
                let mut r = x[i] * (2.0 + 5.0 * x[i] * x[i]) + 1.0;
                for j in (lo..=hi).filter(|&j| j != i) {
                    r -= x[j] * (1.0 + x[j]);
                }
                f += r * r;
                g[i] += 2.0 * r * (2.0 + 15.0 * x[i] * x[i]);
                for j in (lo..=hi).filter(|&j| j != i) {
                    g[j] -= 2.0 * r * (1.0 + 2.0 * x[j]);
                }
            }
        }
        Kind::Penalty1 => {
            const A: f64 = 1e-5;
            let t = x.norm_squared() - 0.25;
            f = t * t;
            for i in 0..n {
                f += A * (x[i] - 1.0).powi(2);
                g[i] = 2.0 * A * (x[i] - 1.0) + 4.0 * t * x[i];
            }
        }
        Kind::QuadraticSpread | Kind::QuadraticIll => {
            let decades = if kind == Kind::QuadraticSpread { 2.0 } else { 6.0 };
            for i in 0..n {
                let d = log_spaced(i, n, decades);
                f += 0.5 * d * x[i] * x[i];
                g[i] = d * x[i];
            }
        }
        Kind::Arwhead => {
            let z = x[n - 1];
            for i in 0..n - 1 {
                let q = x[i] * x[i] + z * z;
                f += -4.0 * x[i] + 3.0 + q * q;
                g[i] += -4.0 + 4.0 * q * x[i];
                g[n - 1] += 4.0 * q * z;
            }
        }
        Kind::Nondia => {
            f = (x[0] - 1.0).powi(2);
            g[0] = 2.0 * (x[0] - 1.0);
            for i in 1..n {
                let t = x[0] - x[i - 1] * x[i - 1];
                f += 100.0 * t * t;
                g[0] += 200.0 * t;
                g[i - 1] -= 400.0 * t * x[i - 1];
            }
        }
        Kind::Engval1 => {
            for i in 0..n - 1 {
                let q = x[i] * x[i] + x[i + 1] * x[i + 1];
                f += q * q - 4.0 * x[i] + 3.0;
                g[i] += 4.0 * q * x[i] - 4.0;
                g[i + 1] += 4.0 * q * x[i + 1];
            }
        }
        Kind::DoubleWell => {
            for i in 0..n {
                let w = x[i] * x[i] - 1.0;
                f += w * w;
                g[i] += 4.0 * w * x[i];
                if i + 1 < n {
                    let d = x[i + 1] - x[i];
                    f += 0.5 * d * d;
                    g[i] -= d;
                    g[i + 1] += d;
                }
            }
        }
        Kind::PerturbedQuadratic => {
            let s: f64 = x.sum();
            f = 0.01 * s * s;
            for i in 0..n {
                f += (i + 1) as f64 * x[i] * x[i];
                g[i] = 2.0 * (i + 1) as f64 * x[i] + 0.02 * s;
            }
        }
        Kind::Raydan1 => {
            for i in 0..n {
                let w = (i + 1) as f64 / 10.0;
                let e = x[i].exp();
                f += w * (e - x[i]);
                g[i] = w * (e - 1.0);
            }
        }
        Kind::Cosine => {
            for i in 0..n - 1 {
                let u = x[i] * x[i] - 0.5 * x[i + 1];
                f += u.cos();
                g[i] -= u.sin() * 2.0 * x[i];
                g[i + 1] += 0.5 * u.sin();
            }
        }
        Kind::Liarwhd => {
            for i in 0..n {
                let t = x[i] * x[i] - x[0];
                f += 4.0 * t * t + (x[i] - 1.0).powi(2);
                g[i] += 16.0 * t * x[i] + 2.0 * (x[i] - 1.0);
                g[0] -= 8.0 * t;
            }
        }
        Kind::ChainedRosenbrock => {
            for i in 0..n - 1 {
                let t = x[i + 1] - x[i] * x[i];
                f += 100.0 * t * t + (1.0 - x[i]).powi(2);
                g[i] += -400.0 * x[i] * t - 2.0 * (1.0 - x[i]);
                g[i + 1] += 200.0 * t;
            }
        }
        Kind::ChainedWood => {
            // overlapping Wood blocks starting at every even index
            for i in (0..n - 3).step_by(2) {
                let (a, b, c, d) = (x[i], x[i + 1], x[i + 2], x[i + 3]);
                let (t1, t2) = (b - a * a, d - c * c);
                let (u, v) = (b + d - 2.0, b - d);
                f += 100.0 * t1 * t1
                    + (1.0 - a).powi(2)
                    + 90.0 * t2 * t2
                    + (1.0 - c).powi(2)
                    + 10.0 * u * u
                    + 0.1 * v * v;
                g[i] += -400.0 * a * t1 - 2.0 * (1.0 - a);
                g[i + 1] += 200.0 * t1 + 20.0 * u + 0.2 * v;
                g[i + 2] += -360.0 * c * t2 - 2.0 * (1.0 - c);
                g[i + 3] += 180.0 * t2 + 20.0 * u - 0.2 * v;
            }
        }
        Kind::ScaledRosenbrock => {
            let d = rosen_scale(n);
            let z = x.component_mul(&d);
            let (fz, gz) = eval(Kind::ExtRosenbrock, &z);
            f = fz;
            g = gz.component_mul(&d);
        }
        Kind::DiscreteBv => {
            let h = 1.0 / (n as f64 + 1.0);
            let at = |j: isize| if j < 0 || j >= n as isize { 0.0 } else { x[j as usize] };
            for i in 0..n {
                let t = (i + 1) as f64 * h;
                let w = x[i] + t + 1.0;
                let r = 2.0 * x[i] - at(i as isize - 1) - at(i as isize + 1) + 0.5 * h * h * w.powi(3);
                f += r * r;
                g[i] += 2.0 * r * (2.0 + 1.5 * h * h * w * w);
                if i > 0 {
                    g[i - 1] -= 2.0 * r;
                }
                if i + 1 < n {
                    g[i + 1] -= 2.0 * r;
                }
            }
        }
        Kind::SumQuartics => {
            let nf = n as f64;
            for i in 0..n {
                let w = (i + 1) as f64 / nf;
                f += w * x[i].powi(4);
                g[i] = 4.0 * w * x[i].powi(3);
            }
        }
    }
    (f, g)
}

impl Objective for ProblemDef {
    fn dim(&self) -> usize {
        self.n
    }

    fn start(&self) -> DVector<f64> {
        self.x0.clone()
    }

    fn value_and_gradient(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        assert_eq!(x.len(), self.n, "{}: point has wrong dimension", self.name);
        eval(self.kind, x)
    }
}

/// Default finite-difference step at `x`.
pub fn fd_step(x: &DVector<f64>) -> f64 {
    1e-6 * (1.0 + x.amax())
}

/// Central-difference gradient check. Returns the largest component error
/// `|g_i − d_i| / max(1, |g_i|)`.
pub fn fd_gradient_check(p: &dyn Objective, x: &DVector<f64>, h: f64) -> f64 {
    let g = p.gradient(x);
    let mut xp = x.clone();
    let mut worst = 0.0_f64;
    for i in 0..x.len() {
        xp[i] = x[i] + h;
        let fp = p.value(&xp);
        xp[i] = x[i] - h;
        let fm = p.value(&xp);
        xp[i] = x[i];
        let d = (fp - fm) / (2.0 * h);
        worst = worst.max((g[i] - d).abs() / g[i].abs().max(1.0));
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn suite_has_enough_problems() {
        let s = suite(20).unwrap();
        assert!(s.len() >= 20);
        let names: Vec<_> = s.iter().map(|p| p.name).collect();
        let mut dedup = names.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), names.len());
    }

    #[test]
    fn bad_dimensions_are_rejected() {
        assert_eq!(suite(6).unwrap_err(), ProblemError::InvalidDimension(6));
        assert_eq!(suite(0).unwrap_err(), ProblemError::InvalidDimension(0));
        assert!(matches!(problem("nope", 8), Err(ProblemError::UnknownProblem(_))));
    }

    #[test]
    fn suite_is_scale_consistent() {
        let small: Vec<_> = suite(100).unwrap().iter().map(|p| p.name).collect();
        let large: Vec<_> = suite(1000).unwrap().iter().map(|p| (p.name, p.n, p.x0.len())).collect();
        assert_eq!(small, large.iter().map(|t| t.0).collect::<Vec<_>>());
        assert!(large.iter().all(|&(_, n, l)| n == 1000 && l == 1000));
    }

    #[test]
    fn start_points_are_finite() {
        for p in suite(1000).unwrap() {
            let (f, g) = p.value_and_gradient(&p.x0);
            assert!(f.is_finite(), "{}", p.name);
            assert!(g.iter().all(|v| v.is_finite()), "{}", p.name);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for p in suite(20).unwrap() {
            let err = fd_gradient_check(&p, &p.x0, fd_step(&p.x0));
            assert!(err <= 1e-5, "{} at x0: {err:e}", p.name);
            for _ in 0..3 {
                let x = p.x0.map(|v| v + rng.gen_range(-0.1..0.1));
                let err = fd_gradient_check(&p, &x, fd_step(&x));
                assert!(err <= 1e-5, "{} near x0: {err:e}", p.name);
            }
        }
    }

    #[test]
    fn quadratic_check_is_exact() {
        let q = FnObjective::new(DVector::from_element(8, 1.0), |x: &DVector<f64>| {
            (0.5 * x.norm_squared(), x.clone())
        });
        let x = DVector::from_fn(8, |i, _| i as f64 * 0.3 - 1.0);
        assert!(fd_gradient_check(&q, &x, fd_step(&x)) <= 1e-9);
    }

    #[test]
    fn known_minima() {
        let x = DVector::from_element(8, 1.0);
        let p = problem("ext-rosenbrock", 8).unwrap();
        assert_eq!(p.value(&x), 0.0);
        let p = problem("chained-rosenbrock", 8).unwrap();
        assert_eq!(p.gradient(&x).norm(), 0.0);
        let p = problem("ext-wood", 8).unwrap();
        assert!(p.value(&x).abs() < 1e-12);
        let p = problem("ext-powell", 8).unwrap();
        assert_eq!(p.value(&DVector::zeros(8)), 0.0);
    }
}
