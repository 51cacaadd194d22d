//! Dense factorizations used by both Gaussian-process models.
//!
//! The Cholesky factorization and the triangular solves are blocked so that
//! the bulk of the work goes through matrix-matrix products.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::Scalar;

const BLOCK: usize = 64;

/// Jitter values tried in order when a factorization is rejected.
pub const JITTER_LADDER: [f64; 8] = [0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4];

/// Lower Cholesky factor of a symmetric matrix, or `None` when a pivot is
/// not strictly positive.
pub fn cholesky<T: Scalar>(a: &DMatrix<T>) -> Option<DMatrix<T>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "cholesky of a non-square matrix");
    let mut l = DMatrix::<T>::zeros(n, n);
    let mut k = 0;
    while k < n {
        let b = BLOCK.min(n - k);
        let mut panel = a.view((k, k), (n - k, b)).clone_owned();
        if k > 0 {
            let left = l.view((k, 0), (n - k, k)).clone_owned();
            let top_t = left.rows(0, b).transpose();
            panel.gemm(-T::one(), &left, &top_t, T::one());
        }
        // Unblocked factorization of the diagonal block, then the rows below.
        for j in 0..b {
            let mut d = panel[(j, j)];
            for p in 0..j {
                d -= panel[(j, p)] * panel[(j, p)];
            }
            if !(d > T::zero()) || !d.is_finite() {
                return None;
            }
            let d = d.sqrt();
            panel[(j, j)] = d;
            for i in (j + 1)..(n - k) {
                let mut s = panel[(i, j)];
                for p in 0..j {
                    s -= panel[(i, p)] * panel[(j, p)];
                }
                panel[(i, j)] = s / d;
            }
        }
        for j in 0..b {
            for i in j..(n - k) {
                l[(k + i, k + j)] = panel[(i, j)];
            }
        }
        k += b;
    }
    Some(l)
}

/// Solves `L X = B` for lower-triangular `L`.
pub fn solve_lower<T: Scalar>(l: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    let n = l.nrows();
    assert_eq!(n, b.nrows());
    let mut x = b.clone_owned();
    let mut k = 0;
    while k < n {
        let bs = BLOCK.min(n - k);
        if k > 0 {
            let solved = x.rows(0, k).clone_owned();
            let lpanel = l.view((k, 0), (bs, k));
            x.rows_mut(k, bs).gemm(-T::one(), &lpanel, &solved, T::one());
        }
        for c in 0..x.ncols() {
            for i in 0..bs {
                let mut s = x[(k + i, c)];
                for p in 0..i {
                    s -= l[(k + i, k + p)] * x[(k + p, c)];
                }
                x[(k + i, c)] = s / l[(k + i, k + i)];
            }
        }
        k += bs;
    }
    x
}

/// Solves `(L Lᵀ) x = b`.
pub fn cholesky_solve<T: Scalar>(l: &DMatrix<T>, b: &DVector<T>) -> DVector<T> {
    let z = l
        .solve_lower_triangular(b)
        .expect("cholesky factor has a nonzero diagonal");
    l.tr_solve_lower_triangular(&z)
        .expect("cholesky factor has a nonzero diagonal")
}

/// `min(L_ii)² / max(L_ii)²`, a cheap reciprocal-condition proxy.
pub fn pivot_ratio<T: Scalar>(l: &DMatrix<T>) -> f64 {
    let diag = l.diagonal();
    if diag.is_empty() {
        return 1.0;
    }
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for d in diag.iter() {
        let d = d.as_f64();
        lo = lo.min(d * d);
        hi = hi.max(d * d);
    }
    if hi == 0.0 {
        0.0
    } else {
        lo / hi
    }
}

/// Result of factoring `A + jitter·I`.
#[derive(Debug, Clone)]
pub struct JitteredFactor<T: Scalar> {
    pub l: DMatrix<T>,
    pub jitter: f64,
}

/// Walks [`JITTER_LADDER`] until `A + jitter·I` factors and `accept` agrees
/// that the factor is usable.
pub fn cholesky_with_jitter<T, F>(a: &DMatrix<T>, mut accept: F) -> Result<JitteredFactor<T>>
where
    T: Scalar,
    F: FnMut(&DMatrix<T>, f64) -> bool,
{
    let mut last_ratio = 0.0;
    for &jitter in JITTER_LADDER.iter() {
        let mut shifted = a.clone_owned();
        if jitter > 0.0 {
            let j = T::lit(jitter);
            for i in 0..shifted.nrows() {
                shifted[(i, i)] += j;
            }
        }
        if let Some(l) = cholesky(&shifted) {
            last_ratio = pivot_ratio(&l);
            if accept(&l, jitter) {
                return Ok(JitteredFactor { l, jitter });
            }
        }
    }
    Err(Error::Numerical {
        message: "kernel matrix is not positive definite".into(),
        jitter: *JITTER_LADDER.last().unwrap(),
        pivot_ratio: last_ratio,
    })
}

/// `true` when the symmetric matrix has minimum eigenvalue at least
/// `-tol · trace`.
pub fn is_psd<T: Scalar>(a: &DMatrix<T>, tol: f64) -> bool {
    if a.nrows() == 0 {
        return true;
    }
    let trace = a.trace().as_f64();
    let eig = a.clone_owned().symmetric_eigen();
    let min = eig.eigenvalues.iter().map(|v| v.as_f64()).fold(f64::INFINITY, f64::min);
    min >= -tol * trace.abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_spd(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = crate::rng::seeded(seed);
        let g = DMatrix::<f64>::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &g * g.transpose() + DMatrix::identity(n, n) * (n as f64 * 0.1)
    }

    #[test]
    fn blocked_cholesky_matches_nalgebra() {
        for &n in &[1usize, 5, 64, 65, 150] {
            let a = random_spd(n, n as u64);
            let ours = cholesky(&a).unwrap();
            let theirs = a.clone().cholesky().unwrap().l();
            assert!((&ours - &theirs).norm() <= 1e-9 * theirs.norm(), "n = {n}");
        }
    }

    #[test]
    fn blocked_solve_matches_dense() {
        let a = random_spd(140, 7);
        let l = cholesky(&a).unwrap();
        let mut rng = crate::rng::seeded(3);
        let b = DMatrix::<f64>::from_fn(140, 9, |_, _| rng.random_range(-1.0..1.0));
        let x = solve_lower(&l, &b);
        assert!((&l * &x - &b).norm() < 1e-9);
    }

    #[test]
    fn ladder_rescues_rank_deficient() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let f = cholesky_with_jitter(&a, |_, _| true).unwrap();
        assert!(f.jitter > 0.0);
        let f = cholesky_with_jitter(&a, |_, _| false);
        assert!(matches!(f, Err(Error::Numerical { .. })));
    }

    #[test]
    fn works_in_single_precision() {
        let a = DMatrix::<f32>::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 3.0]);
        let l = cholesky(&a).unwrap();
        assert!((l[(0, 0)] - 2.0).abs() < 1e-6);
        assert!((l[(1, 1)] - 2f32.sqrt()).abs() < 1e-6);
    }
}
