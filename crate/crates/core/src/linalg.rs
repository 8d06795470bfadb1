//! Small dense helpers shared by the per-node computations.

use nalgebra::{DMatrix, DVector};

/// Singular values in descending order.
pub(crate) fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Values at or below this are roundoff in every quantity the crate ranks.
pub(crate) const ABS_RANK_FLOOR: f64 = 1e-9;

/// Rank with a threshold relative to the largest singular value, never
/// counting values under [`ABS_RANK_FLOOR`].
pub(crate) fn numerical_rank(m: &DMatrix<f64>, rel: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&top) => s.iter().filter(|&&v| v > (rel * top).max(ABS_RANK_FLOOR)).count(),
        _ => 0,
    }
}

pub(crate) fn condition_number(m: &DMatrix<f64>) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// `S^{-1/2}` for a symmetric positive definite `S`.
pub(crate) fn inv_sqrt_spd(s: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = s.clone().symmetric_eigen();
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.max(1e-300).sqrt()));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// Minimum-norm least-squares solution of `a x = b`.
pub(crate) fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    if a.ncols() == 0 {
        return DVector::zeros(0);
    }
    let svd = a.clone().svd(true, true);
    let top = svd.singular_values.max();
    let eps = (top * 1e-12).max(1e-300);
    svd.solve(b, eps).expect("both factors computed")
}

/// Orthonormal columns spanning the same space as `p`'s columns, closest
/// to `p` in Frobenius norm.
pub(crate) fn lowdin(p: &DMatrix<f64>) -> DMatrix<f64> {
    let s = p.transpose() * p;
    p * inv_sqrt_spd(&s)
}

/// Gram–Schmidt over the columns, in order.
pub(crate) fn gram_schmidt(p: &DMatrix<f64>) -> DMatrix<f64> {
    let mut q = p.clone();
    for c in 0..q.ncols() {
        for prev in 0..c {
            let proj = q.column(prev).dot(&q.column(c));
            let v = q.column(prev).clone_owned();
            q.column_mut(c).axpy(-proj, &v, 1.0);
        }
        let n = q.column(c).norm();
        q.column_mut(c).scale_mut(1.0 / n);
    }
    q
}

/// Independent entries of a skew `p × p` matrix, in `(a, b)` with `a < b`
/// order.
pub(crate) fn skew_pairs(p: usize) -> Vec<(usize, usize)> {
    (0..p).flat_map(|a| (a + 1..p).map(move |b| (a, b))).collect()
}
