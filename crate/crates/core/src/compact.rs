//! Limited-memory multipoint symmetric secant matrices in compact form.
//!
//! A [`PairBuffer`] holds the most recent `m` pairs `(s_i, y_i)`, newest in
//! column 0. [`build_compact`] turns the window into
//! `B = B₀ + Ψ M Ψᵀ` with `Ψ = [Ŝ, Ŷ − ζŜ]` after removing dependent steps,
//! and [`spectral_view`] exposes the implicit eigendecomposition
//!
//! ```text
//! B = P∥ (Λ̂ + ζI) P∥ᵀ + ζᶜ (I − P∥ P∥ᵀ)
//! ```
//!
//! where the dense initial matrix is `B₀ = ζ P∥P∥ᵀ + ζᶜ (I − P∥P∥ᵀ)`. Since
//! `range(Ŝ) ⊆ range(P∥)`, `B₀Ŝ = ζŜ`, which is what lets `Ψ` be formed before
//! `P∥` is known.

use std::collections::VecDeque;

use log::debug;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dense::{gram, ldlt_pivoted, solve_upper_tri, sym_eig, symmetrize};
use crate::error::{CompactError, KernelError};

/// Rule deciding whether a new pair enters the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum AcceptanceRule {
    /// Store only when `sᵀy > ε‖s‖‖y‖`.
    #[default]
    #[serde(rename = "positive")]
    MssPositive,
    /// Store every pair with finite entries.
    #[serde(rename = "always")]
    Always,
}

/// Window of the most recent quasi-Newton pairs, newest first.
#[derive(Debug, Clone)]
pub struct PairBuffer {
    dim: usize,
    capacity: usize,
    pairs: VecDeque<(DVector<f64>, DVector<f64>)>,
}

impl PairBuffer {
    pub fn new(dim: usize, capacity: usize) -> Self {
        assert!(capacity >= 1, "pair buffer capacity must be positive");
        Self {
            dim,
            capacity,
            pairs: VecDeque::with_capacity(capacity),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn clear(&mut self) {
        self.pairs.clear();
    }

    /// Pairs from newest to oldest.
    pub fn iter(&self) -> impl Iterator<Item = (&DVector<f64>, &DVector<f64>)> + '_ {
        self.pairs.iter().map(|(s, y)| (s, y))
    }

    pub fn newest(&self) -> Option<(&DVector<f64>, &DVector<f64>)> {
        self.pairs.front().map(|(s, y)| (s, y))
    }

    /// Offers `(s, y)` to the window. Returns whether it was stored; when the
    /// window is full the oldest pair is evicted first.
    pub fn try_accept(
        &mut self,
        s: &DVector<f64>,
        y: &DVector<f64>,
        rule: AcceptanceRule,
    ) -> Result<bool, CompactError> {
        if s.len() != self.dim {
            return Err(CompactError::Dimension { expected: self.dim, got: s.len() });
        }
        if y.len() != self.dim {
            return Err(CompactError::Dimension { expected: self.dim, got: y.len() });
        }
        let snorm = s.norm();
        if snorm == 0.0 {
            return Err(CompactError::ZeroStep);
        }
        if !snorm.is_finite() || !y.iter().all(|v| v.is_finite()) {
            return Ok(false);
        }
        let accept = match rule {
            AcceptanceRule::Always => true,
            AcceptanceRule::MssPositive => s.dot(y) > f64::EPSILON * snorm * y.norm(),
        };
        if accept {
            self.push(s.clone(), y.clone());
        }
        Ok(accept)
    }

    /// Stores a pair without any acceptance test.
    pub fn push(&mut self, s: DVector<f64>, y: DVector<f64>) {
        if self.pairs.len() == self.capacity {
            self.pairs.pop_back();
        }
        self.pairs.push_front((s, y));
    }

    /// Drops the newest pair (used to roll back a tentative update).
    pub fn pop_newest(&mut self) -> Option<(DVector<f64>, DVector<f64>)> {
        self.pairs.pop_front()
    }

    pub fn s_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.len(), |i, j| self.pairs[j].0[i])
    }

    pub fn y_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.len(), |i, j| self.pairs[j].1[i])
    }
}

/// Stacks vectors of length `n` as columns; zero columns give an `n × 0` matrix.
pub fn column_stack(n: usize, cols: &[DVector<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i])
}

/// Keeps the lower triangle (with diagonal) of `a` and mirrors it upward.
pub fn sym_lower(a: &DMatrix<f64>) -> DMatrix<f64> {
    let k = a.nrows();
    assert_eq!(k, a.ncols(), "sym_lower needs a square matrix");
    DMatrix::from_fn(k, k, |i, j| if i >= j { a[(i, j)] } else { a[(j, i)] })
}

/// `B = B₀ + Ψ M Ψᵀ` for the filtered window, plus the `ΨᵀΨ` rank factors.
#[derive(Debug, Clone)]
pub struct CompactFactorization {
    pub n: usize,
    pub zeta: f64,
    pub zeta_c: f64,
    /// Window columns retained after filtering `SᵀS`, newest first.
    pub kept_pairs: Vec<usize>,
    pub s_hat: DMatrix<f64>,
    pub y_hat: DMatrix<f64>,
    pub psi: DMatrix<f64>,
    pub m: DMatrix<f64>,
    /// `(ŜᵀŜ)⁻¹`.
    pub w: DMatrix<f64>,
    /// Pivot order of the `ΨᵀΨ` factorization.
    pub perm: Vec<usize>,
    /// `√D_J · L[:, J]ᵀ`, `r × q`, columns in pivot order.
    pub r_dag: DMatrix<f64>,
    /// `R†` restricted to the columns in `J`; upper triangular.
    pub r_ddag: DMatrix<f64>,
    /// Retained pivot positions of `ΨᵀΨ`.
    pub kept: Vec<usize>,
}

impl CompactFactorization {
    fn empty(n: usize, zeta: f64, zeta_c: f64) -> Self {
        Self {
            n,
            zeta,
            zeta_c,
            kept_pairs: Vec::new(),
            s_hat: DMatrix::zeros(n, 0),
            y_hat: DMatrix::zeros(n, 0),
            psi: DMatrix::zeros(n, 0),
            m: DMatrix::zeros(0, 0),
            w: DMatrix::zeros(0, 0),
            perm: Vec::new(),
            r_dag: DMatrix::zeros(0, 0),
            r_ddag: DMatrix::zeros(0, 0),
            kept: Vec::new(),
        }
    }

    /// True when every step was dependent; callers then use `B = B₀`.
    pub fn is_empty(&self) -> bool {
        self.kept.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.kept.len()
    }

    /// `B₀v + ΨMΨᵀv`, with `B₀` taken from the projector of `view`.
    pub fn apply(&self, view: &SpectralView, v: &DVector<f64>) -> DVector<f64> {
        let mut out = view.apply_initial(v);
        if self.psi.ncols() > 0 {
            let t = self.psi.tr_mul(v);
            out += &self.psi * (&self.m * t);
        }
        out
    }
}

/// Gram matrix of the unit-normalized columns, plus the column norms.
/// The rank tests run on this so that a column is not dropped just for
/// being short next to a long one.
fn scaled_gram(x: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let norms: Vec<f64> = x.column_iter().map(|c| c.norm()).collect();
    let unit = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
        if norms[j] > 0.0 {
            x[(i, j)] / norms[j]
        } else {
            0.0
        }
    });
    (gram(&unit), norms)
}

/// Builds the compact form from the pair window.
pub fn build_compact(
    buffer: &PairBuffer,
    zeta: f64,
    zeta_c: f64,
    tol: f64,
) -> Result<CompactFactorization, CompactError> {
    if buffer.is_empty() {
        return Err(CompactError::EmptyBuffer);
    }
    let n = buffer.dim();
    let s = buffer.s_matrix();
    let y = buffer.y_matrix();

    let (sts, _) = scaled_gram(&s);
    let kept_pairs = match ldlt_pivoted(&sts, tol) {
        Ok(f) => f.kept_original(),
        Err(KernelError::Degenerate) => {
            debug!("all {} stored steps are dependent; using B = B0", buffer.len());
            return Ok(CompactFactorization::empty(n, zeta, zeta_c));
        }
        Err(e) => return Err(e.into()),
    };
    let s_hat = s.select_columns(&kept_pairs);
    let y_hat = y.select_columns(&kept_pairs);
    let l = kept_pairs.len();

    let sts_hat = gram(&s_hat);
    let w = ldlt_pivoted(&sts_hat, f64::MIN_POSITIVE)?.inverse()?;

    let sty = s_hat.tr_mul(&y_hat);
    // T + E + Tᵀ from the upper triangle of ŜᵀŶ
    let tet = DMatrix::from_fn(l, l, |i, j| if i <= j { sty[(i, j)] } else { sty[(j, i)] });
    let top_left = symmetrize(&(&w * (sts_hat * zeta - tet) * &w));

    let q = 2 * l;
    let mut m = DMatrix::zeros(q, q);
    m.view_mut((0, 0), (l, l)).copy_from(&top_left);
    m.view_mut((0, l), (l, l)).copy_from(&w);
    m.view_mut((l, 0), (l, l)).copy_from(&w);

    let mut psi = DMatrix::zeros(n, q);
    psi.view_mut((0, 0), (n, l)).copy_from(&s_hat);
    psi.view_mut((0, l), (n, l)).copy_from(&(&y_hat - &s_hat * zeta));

    let (psi_gram, scale) = scaled_gram(&psi);
    let fac = match ldlt_pivoted(&psi_gram, tol) {
        Ok(f) => f,
        Err(KernelError::Degenerate) => return Ok(CompactFactorization::empty(n, zeta, zeta_c)),
        Err(e) => return Err(e.into()),
    };
    let r = fac.rank();
    let mut r_dag = DMatrix::zeros(r, q);
    for (row, &j) in fac.kept.iter().enumerate() {
        let sd = fac.d[j].sqrt();
        for c in 0..q {
            r_dag[(row, c)] = sd * fac.l[(c, j)] * scale[fac.perm[c]];
        }
    }
    let r_ddag = r_dag.select_columns(&fac.kept);

    Ok(CompactFactorization {
        n,
        zeta,
        zeta_c,
        kept_pairs,
        s_hat,
        y_hat,
        psi,
        m,
        w,
        perm: fac.perm,
        r_dag,
        r_ddag,
        kept: fac.kept,
    })
}

/// Implicit eigendecomposition of `B`.
#[derive(Debug, Clone)]
pub struct SpectralView {
    /// Orthonormal `n × r` basis `P∥`.
    pub p: DMatrix<f64>,
    /// `Λ̂`, ascending.
    pub lambda_hat: DVector<f64>,
    pub zeta: f64,
    pub zeta_c: f64,
    pub n: usize,
}

impl SpectralView {
    /// View with no stored information: `B = ζᶜ I`.
    pub fn empty(n: usize, zeta: f64, zeta_c: f64) -> Self {
        Self {
            p: DMatrix::zeros(n, 0),
            lambda_hat: DVector::zeros(0),
            zeta,
            zeta_c,
            n,
        }
    }

    pub fn rank(&self) -> usize {
        self.lambda_hat.len()
    }

    /// Eigenvalues `λ̂_i + ζ` on `range(P∥)`.
    pub fn parallel_eigenvalues(&self) -> DVector<f64> {
        self.lambda_hat.add_scalar(self.zeta)
    }

    /// Multiplicity of `ζᶜ` in the spectrum of `B`.
    pub fn far_multiplicity(&self) -> usize {
        self.n - self.rank()
    }

    pub fn apply_b(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = v * self.zeta_c;
        if self.rank() > 0 {
            let a = self.p.tr_mul(v);
            let scaled = a.component_mul(&self.lambda_hat.add_scalar(self.zeta - self.zeta_c));
            out += &self.p * scaled;
        }
        out
    }

    /// `B₀v = ζP∥P∥ᵀv + ζᶜ(v − P∥P∥ᵀv)`.
    pub fn apply_initial(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = v * self.zeta_c;
        if self.rank() > 0 {
            let a = self.p.tr_mul(v);
            out += &self.p * (a * (self.zeta - self.zeta_c));
        }
        out
    }

    /// `(cond(B), ‖B‖₂)` from the eigenvalues.
    pub fn cond_and_norm(&self) -> (f64, f64) {
        let mut max_abs = 0.0_f64;
        let mut min_abs = f64::INFINITY;
        for lam in self.parallel_eigenvalues().iter() {
            max_abs = max_abs.max(lam.abs());
            min_abs = min_abs.min(lam.abs());
        }
        if self.far_multiplicity() > 0 {
            max_abs = max_abs.max(self.zeta_c.abs());
            min_abs = min_abs.min(self.zeta_c.abs());
        }
        let cond = if min_abs == 0.0 { f64::INFINITY } else { max_abs / min_abs };
        (cond, max_abs)
    }

    /// Smallest eigenvalue of `B`.
    pub fn lambda_min(&self) -> f64 {
        let mut lo = self.parallel_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
        if self.far_multiplicity() > 0 {
            lo = lo.min(self.zeta_c);
        }
        lo
    }

    /// All `n` eigenvalues of `B`, ascending. Intended for small `n`.
    pub fn full_spectrum(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self.parallel_eigenvalues().iter().cloned().collect();
        all.extend(std::iter::repeat_n(self.zeta_c, self.far_multiplicity()));
        all.sort_by(f64::total_cmp);
        all
    }

    /// Dense `B`. Intended for tests and small problems.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut b = DMatrix::identity(self.n, self.n) * self.zeta_c;
        if self.rank() > 0 {
            let d = DMatrix::from_diagonal(&self.lambda_hat.add_scalar(self.zeta - self.zeta_c));
            b += &self.p * d * self.p.transpose();
        }
        symmetrize(&b)
    }

    /// `P∥P∥ᵀ`.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.p * self.p.transpose()
    }
}

/// Computes `P∥` and `Λ̂` from the compact factors.
pub fn spectral_view(cf: &CompactFactorization) -> Result<SpectralView, CompactError> {
    if cf.is_empty() {
        return Ok(SpectralView::empty(cf.n, cf.zeta, cf.zeta_c));
    }
    let q = cf.psi.ncols();
    let m_perm = DMatrix::from_fn(q, q, |i, j| cf.m[(cf.perm[i], cf.perm[j])]);
    let small = symmetrize(&(&cf.r_dag * m_perm * cf.r_dag.transpose()));
    let eig = sym_eig(&small);

    let kept_cols: Vec<usize> = cf.kept.iter().map(|&j| cf.perm[j]).collect();
    let psi_kept = cf.psi.select_columns(&kept_cols);
    let coeff = solve_upper_tri(&cf.r_ddag, &eig.u)?;
    let p = psi_kept * coeff;

    Ok(SpectralView {
        p,
        lambda_hat: eig.lambda,
        zeta: cf.zeta,
        zeta_c: cf.zeta_c,
        n: cf.n,
    })
}

/// Convenience: compact build followed by the spectral view.
pub fn build_view(
    buffer: &PairBuffer,
    zeta: f64,
    zeta_c: f64,
    tol: f64,
) -> Result<(CompactFactorization, SpectralView), CompactError> {
    let cf = build_compact(buffer, zeta, zeta_c, tol)?;
    let view = spectral_view(&cf)?;
    Ok((cf, view))
}

/// One step of the dense rank-2 recursion with the least-change choice
/// `c = (I − S(SᵀS)⁻¹Sᵀ)s` for the previous steps `s_prev`.
///
/// Small-scale reference only: costs `O(n²)` memory.
pub fn rank2_update_dense(
    b: &DMatrix<f64>,
    s: &DVector<f64>,
    y: &DVector<f64>,
    s_prev: &DMatrix<f64>,
) -> Result<DMatrix<f64>, CompactError> {
    let c = if s_prev.ncols() == 0 {
        s.clone()
    } else {
        let g = gram(s_prev);
        let fac = ldlt_pivoted(&g, f64::MIN_POSITIVE)?;
        let coef = fac.solve(&DMatrix::from_column_slice(s_prev.ncols(), 1, s_prev.tr_mul(s).as_slice()))?;
        s - s_prev * coef.column(0)
    };
    let cts = c.dot(s);
    if cts.abs() <= 1e-10 * s.norm_squared() {
        return Err(CompactError::DependentStep(cts));
    }
    rank2_update_with(b, s, y, &c)
}

/// The rank-2 formula for an explicit `c` with `cᵀs ≠ 0`.
pub fn rank2_update_with(
    b: &DMatrix<f64>,
    s: &DVector<f64>,
    y: &DVector<f64>,
    c: &DVector<f64>,
) -> Result<DMatrix<f64>, CompactError> {
    let cts = c.dot(s);
    if cts == 0.0 {
        return Err(CompactError::DependentStep(cts));
    }
    let r = y - b * s;
    let rs = r.dot(s);
    let out = b + (&r * c.transpose() + c * r.transpose()) / cts - (c * c.transpose()) * (rs / (cts * cts));
    Ok(symmetrize(&out))
}
