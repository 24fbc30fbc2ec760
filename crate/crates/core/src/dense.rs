//! Small dense linear algebra used by the compact representation.
//!
//! Everything here operates on matrices of order at most `2m + 2` (with
//! `m <= 7` stored pairs), except [`gram`], which forms `XᵀX` for a tall
//! `n × k` matrix. All routines are pure and deterministic.

use nalgebra::{DMatrix, DVector};

use crate::error::KernelError;

/// Default relative pivot threshold used for rank filtering of Gram matrices.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Returns `XᵀX`, symmetrized after accumulation.
pub fn gram(x: &DMatrix<f64>) -> DMatrix<f64> {
    let k = x.ncols();
    let mut out = DMatrix::zeros(k, k);
    for j in 0..k {
        let cj = x.column(j);
        for i in 0..=j {
            let v = x.column(i).dot(&cj);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Pivoted `LDLᵀ` factorization with rank detection.
///
/// With `P` the permutation taking pivot position `i` to original index
/// `perm[i]`, the factorization satisfies `PᵀAP ≈ L·diag(D)·Lᵀ`. Pivots that
/// fail the threshold are recorded in `d` but are not used to eliminate, so the
/// kept block `(PᵀAP)[J, J]` is reproduced exactly by `L[J, J]·D[J]·L[J, J]ᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LdltFactor {
    /// Unit lower-triangular factor in pivot order.
    pub l: DMatrix<f64>,
    /// Diagonal of `D` in pivot order.
    pub d: DVector<f64>,
    /// `perm[i]` is the original row/column placed at pivot position `i`.
    pub perm: Vec<usize>,
    /// Retained pivot positions, ascending.
    pub kept: Vec<usize>,
}

impl LdltFactor {
    pub fn order(&self) -> usize {
        self.d.len()
    }

    pub fn rank(&self) -> usize {
        self.kept.len()
    }

    pub fn is_full_rank(&self) -> bool {
        self.kept.len() == self.d.len()
    }

    /// Original indices of the retained pivots, ascending.
    pub fn kept_original(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = self.kept.iter().map(|&p| self.perm[p]).collect();
        idx.sort_unstable();
        idx
    }

    /// Reassembles `PᵀAP` from the factors.
    pub fn reconstruct_permuted(&self) -> DMatrix<f64> {
        let k = self.order();
        let mut out = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                let mut acc = 0.0;
                for p in 0..k {
                    acc += self.l[(i, p)] * self.d[p] * self.l[(j, p)];
                }
                out[(i, j)] = acc;
            }
        }
        out
    }

    /// Solves `A x = b` for a full-rank factorization.
    pub fn solve(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>, KernelError> {
        if !self.is_full_rank() {
            return Err(KernelError::RankDeficient {
                rank: self.rank(),
                order: self.order(),
            });
        }
        let k = self.order();
        if b.nrows() != k {
            return Err(KernelError::Dimension(format!(
                "rhs has {} rows, factor has order {k}",
                b.nrows()
            )));
        }
        let mut x = DMatrix::zeros(k, b.ncols());
        for c in 0..b.ncols() {
            // permute, forward, diagonal, backward, unpermute
            let mut z: Vec<f64> = (0..k).map(|i| b[(self.perm[i], c)]).collect();
            for i in 0..k {
                for p in 0..i {
                    z[i] -= self.l[(i, p)] * z[p];
                }
            }
            for (zi, di) in z.iter_mut().zip(self.d.iter()) {
                *zi /= di;
            }
            for i in (0..k).rev() {
                for p in i + 1..k {
                    z[i] -= self.l[(p, i)] * z[p];
                }
            }
            for i in 0..k {
                x[(self.perm[i], c)] = z[i];
            }
        }
        Ok(x)
    }

    /// Inverse of a full-rank factorization.
    pub fn inverse(&self) -> Result<DMatrix<f64>, KernelError> {
        let k = self.order();
        let inv = self.solve(&DMatrix::identity(k, k))?;
        Ok(symmetrize(&inv))
    }
}

/// `LDLᵀ` of a symmetric positive semidefinite matrix with diagonal pivoting.
///
/// At each step the largest remaining diagonal entry is chosen (ties go to the
/// lowest original index). A pivot is retained when `D_ii > tol · max_j |D_jj|`.
pub fn ldlt_pivoted(a: &DMatrix<f64>, tol: f64) -> Result<LdltFactor, KernelError> {
    let k = a.nrows();
    if a.ncols() != k {
        return Err(KernelError::Dimension(format!(
            "ldlt needs a square matrix, got {}x{}",
            k,
            a.ncols()
        )));
    }
    if !(tol > 0.0) {
        return Err(KernelError::InvalidTolerance(tol));
    }
    if k == 0 {
        return Err(KernelError::Degenerate);
    }

    let mut work = a.clone();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut l = DMatrix::<f64>::identity(k, k);
    let mut d = DVector::<f64>::zeros(k);
    let mut eliminated = vec![false; k];

    for j in 0..k {
        let mut best = j;
        for i in j + 1..k {
            if work[(i, i)] > work[(best, best)] {
                best = i;
            }
        }
        if best != j {
            work.swap_rows(j, best);
            work.swap_columns(j, best);
            perm.swap(j, best);
            // keep the already computed part of L consistent with the swap
            for p in 0..j {
                let t = l[(j, p)];
                l[(j, p)] = l[(best, p)];
                l[(best, p)] = t;
            }
        }
        let pivot = work[(j, j)];
        d[j] = pivot;
        // max |D| so far is the first pivot for PSD input; use the running max
        // to stay correct under roundoff
        let dmax = d.iter().take(j + 1).fold(0.0_f64, |acc, v| acc.max(v.abs()));
        if pivot > 0.0 && pivot > tol * dmax {
            eliminated[j] = true;
            for i in j + 1..k {
                l[(i, j)] = work[(i, j)] / pivot;
            }
            for c in j + 1..k {
                let lc = l[(c, j)];
                if lc == 0.0 {
                    continue;
                }
                for r in j + 1..k {
                    work[(r, c)] -= l[(r, j)] * pivot * lc;
                }
            }
        }
    }

    // final threshold against the global max |D|
    let dmax = d.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let kept: Vec<usize> = (0..k)
        .filter(|&i| eliminated[i] && d[i] > tol * dmax)
        .collect();
    if kept.is_empty() {
        return Err(KernelError::Degenerate);
    }
    Ok(LdltFactor { l, d, perm, kept })
}

/// Symmetric eigendecomposition `A = U·diag(λ)·Uᵀ` with ascending eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct SymEig {
    pub u: DMatrix<f64>,
    pub lambda: DVector<f64>,
}

/// Cyclic Jacobi eigensolver for small symmetric matrices.
///
/// Eigenvector signs are normalized so that the largest-magnitude entry of each
/// column is positive, which makes the output deterministic.
pub fn sym_eig(a: &DMatrix<f64>) -> SymEig {
    let k = a.nrows();
    assert_eq!(k, a.ncols(), "sym_eig needs a square matrix");
    let mut w = symmetrize(a);
    let mut v = DMatrix::<f64>::identity(k, k);
    let scale = w.norm().max(f64::MIN_POSITIVE);

    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..k {
            for j in i + 1..k {
                off += w[(i, j)] * w[(i, j)];
            }
        }
        if off.sqrt() <= 1e-17 * scale {
            break;
        }
        for p in 0..k {
            for q in p + 1..k {
                let apq = w[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = w[(p, p)];
                let aqq = w[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..k {
                    let wrp = w[(r, p)];
                    let wrq = w[(r, q)];
                    w[(r, p)] = c * wrp - s * wrq;
                    w[(r, q)] = s * wrp + c * wrq;
                }
                for r in 0..k {
                    let wpr = w[(p, r)];
                    let wqr = w[(q, r)];
                    w[(p, r)] = c * wpr - s * wqr;
                    w[(q, r)] = s * wpr + c * wqr;
                }
                w[(p, q)] = 0.0;
                w[(q, p)] = 0.0;
                for r in 0..k {
                    let vrp = v[(r, p)];
                    let vrq = v[(r, q)];
                    v[(r, p)] = c * vrp - s * vrq;
                    v[(r, q)] = s * vrp + c * vrq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| w[(i, i)].total_cmp(&w[(j, j)]).then(i.cmp(&j)));
    let lambda = DVector::from_iterator(k, order.iter().map(|&i| w[(i, i)]));
    let mut u = DMatrix::zeros(k, k);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = v.column(src).clone_owned();
        let (imax, _) = col
            .iter()
            .enumerate()
            .fold((0, 0.0_f64), |(bi, bv), (i, x)| if x.abs() > bv { (i, x.abs()) } else { (bi, bv) });
        if col[imax] < 0.0 {
            col.neg_mut();
        }
        u.set_column(dst, &col);
    }
    SymEig { u, lambda }
}

/// Solves `R X = B` for upper-triangular `R` by back substitution.
pub fn solve_upper_tri(r: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>, KernelError> {
    let n = r.nrows();
    if r.ncols() != n || b.nrows() != n {
        return Err(KernelError::Dimension(format!(
            "triangular solve with R {}x{} and B {}x{}",
            n,
            r.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let dmax = (0..n).fold(0.0_f64, |acc, i| acc.max(r[(i, i)].abs()));
    for i in 0..n {
        if !(r[(i, i)].abs() >= 1e-14 * dmax) || r[(i, i)] == 0.0 {
            return Err(KernelError::Singular { index: i, value: r[(i, i)] });
        }
    }
    let mut x = b.clone();
    for c in 0..b.ncols() {
        for i in (0..n).rev() {
            let mut acc = x[(i, c)];
            for j in i + 1..n {
                acc -= r[(i, j)] * x[(j, c)];
            }
            x[(i, c)] = acc / r[(i, i)];
        }
    }
    Ok(x)
}

/// `(A + Aᵀ) / 2`.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn gram_of_orthonormal_columns_is_identity() {
        let mut x = DMatrix::zeros(3, 2);
        x[(0, 0)] = 1.0;
        x[(1, 1)] = 1.0;
        assert_eq!(gram(&x), DMatrix::identity(2, 2));
        let ones = DMatrix::from_element(2, 1, 1.0);
        assert_eq!(gram(&ones)[(0, 0)], 2.0);
    }

    #[test]
    fn gram_matches_row_major_accumulation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = random_matrix(&mut rng, 50, 4);
        let g = gram(&x);
        // accumulate by rows instead of by columns
        let mut alt = DMatrix::<f64>::zeros(4, 4);
        for r in 0..50 {
            for i in 0..4 {
                for j in 0..4 {
                    alt[(i, j)] += x[(r, i)] * x[(r, j)];
                }
            }
        }
        assert!((&g - &alt).norm() <= 1e-13 * alt.norm());
        assert_eq!(g, g.transpose());
    }

    #[test]
    fn ldlt_identity_and_rank_one() {
        let f = ldlt_pivoted(&DMatrix::identity(2, 2), 1e-8).unwrap();
        assert_eq!(f.d.as_slice(), &[1.0, 1.0]);
        assert_eq!(f.kept, vec![0, 1]);

        let ones = DMatrix::from_element(2, 2, 1.0);
        let f = ldlt_pivoted(&ones, 1e-8).unwrap();
        assert_eq!(f.d.as_slice(), &[1.0, 0.0]);
        assert_eq!(f.kept.len(), 1);
    }

    #[test]
    fn ldlt_reports_degenerate_zero_matrix() {
        let z = DMatrix::zeros(3, 3);
        assert!(matches!(ldlt_pivoted(&z, 1e-8), Err(KernelError::Degenerate)));
        assert!(matches!(
            ldlt_pivoted(&DMatrix::identity(2, 2), 0.0),
            Err(KernelError::InvalidTolerance(_))
        ));
    }

    #[test]
    fn ldlt_rank_of_rank_three_gram() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_matrix(&mut rng, 50, 3);
        let b = random_matrix(&mut rng, 3, 5);
        let x = &a * &b;
        let svd = x.clone().svd(false, false);
        let smax = svd.singular_values.max();
        let numerical_rank = svd.singular_values.iter().filter(|&&s| s > 1e-6 * smax).count();
        assert_eq!(numerical_rank, 3);
        let f = ldlt_pivoted(&gram(&x), 1e-8).unwrap();
        assert_eq!(f.rank(), 3);
    }

    #[test]
    fn ldlt_reconstructs_full_rank_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_matrix(&mut rng, 20, 6);
        let a = gram(&x);
        let f = ldlt_pivoted(&a, 1e-8).unwrap();
        assert!(f.is_full_rank());
        let mut pa = DMatrix::zeros(6, 6);
        for i in 0..6 {
            for j in 0..6 {
                pa[(i, j)] = a[(f.perm[i], f.perm[j])];
            }
        }
        assert!((f.reconstruct_permuted() - pa).norm() <= 1e-12 * a.norm());
        let inv = f.inverse().unwrap();
        assert!((&inv * &a - DMatrix::<f64>::identity(6, 6)).norm() < 1e-10);
    }

    #[test]
    fn sym_eig_small_cases() {
        let e = sym_eig(&DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0])));
        assert_eq!(e.lambda.as_slice(), &[1.0, 3.0]);
        assert_eq!(e.u, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));

        let e = sym_eig(&DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        assert!((e.lambda[0] + 1.0).abs() < 1e-15);
        assert!((e.lambda[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sym_eig_residual_on_random_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = symmetrize(&random_matrix(&mut rng, 10, 10));
        let e = sym_eig(&a);
        let k = 10.0;
        let ortho = (e.u.transpose() * &e.u - DMatrix::<f64>::identity(10, 10)).norm();
        assert!(ortho <= 1e-12 * k);
        let resid = (&a * &e.u - &e.u * DMatrix::from_diagonal(&e.lambda)).norm();
        assert!(resid <= 1e-10 * a.norm());
        for w in e.lambda.as_slice().windows(2) {
            assert!(w[0] <= w[1]);
        }
        assert_eq!(sym_eig(&a), e);
    }

    #[test]
    fn upper_triangular_solves() {
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(solve_upper_tri(&DMatrix::identity(2, 2), &b).unwrap(), b);
        let r = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let x = solve_upper_tri(&r, &DMatrix::identity(2, 2)).unwrap();
        assert_eq!(x, DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.25]));

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut r = random_matrix(&mut rng, 6, 6).upper_triangle();
        for i in 0..6 {
            r[(i, i)] = 2.0 + rng.gen::<f64>();
        }
        let b = random_matrix(&mut rng, 6, 3);
        let x = solve_upper_tri(&r, &b).unwrap();
        assert!((&r * &x - &b).norm() <= 1e-12 * b.norm());

        let mut sing = DMatrix::<f64>::identity(3, 3);
        sing[(2, 2)] = 1e-16;
        assert!(matches!(
            solve_upper_tri(&sing, &DMatrix::identity(3, 3)),
            Err(KernelError::Singular { index: 2, .. })
        ));
    }
}
