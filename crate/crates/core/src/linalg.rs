//! Dense helpers on top of `nalgebra`: norms, symmetric functions of
//! matrices, a column-pivoted Householder QR with deterministic pivoting,
//! and Krylov estimates of the largest eigenvalue of an implicitly given
//! symmetric positive operator.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_traits::Float;

/// Singular values in decreasing order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Operator 2-norm; zero for empty matrices.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Smallest singular value over `min(nrows, ncols)` values.
pub fn smallest_singular_value(m: &DMatrix<f64>) -> f64 {
    singular_values(m).last().copied().unwrap_or(0.0)
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .fold(0.0, |acc, (x, y)| acc.max((x - y).abs()))
}

/// `max |M - Mᵀ|`.
pub fn symmetry_residual(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut r: f64 = 0.0;
    for i in 0..n {
        for j in 0..i {
            r = r.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    r
}

/// `max |M + Mᵀ|`, diagonal included.
pub fn antisymmetry_residual(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut r: f64 = 0.0;
    for i in 0..n {
        for j in 0..=i {
            r = r.max((m[(i, j)] + m[(j, i)]).abs());
        }
    }
    r
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigen-decomposition of the symmetric part of `m`, eigenvalues ascending
/// with eigenvectors as matching columns.
pub fn symmetric_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// `f(M)` for symmetric `M`, applying `f` to each eigenvalue.
pub fn symmetric_function(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let (values, vectors) = symmetric_eigen(m);
    let mut scaled = vectors.clone();
    for (j, &lam) in values.iter().enumerate() {
        let fj = f(lam);
        scaled.column_mut(j).scale_mut(fj);
    }
    scaled * vectors.transpose()
}

/// Column-pivoted Householder QR, `A P = Q R`.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    /// Full square orthogonal factor.
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    /// `perm[k]` is the original column placed at position `k`.
    pub perm: Vec<usize>,
    /// Number of diagonal entries of `R` above `rel_tol · |R₀₀|`.
    pub rank: usize,
}

impl PivotedQr {
    /// Pivoting chooses the remaining column of largest norm; equal norms go
    /// to the smaller original column index so results are reproducible.
    pub fn new(a: &DMatrix<f64>, rel_tol: f64) -> Self {
        let (m, n) = a.shape();
        let mut r = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut norms: Vec<f64> = (0..n).map(|j| r.column(j).norm_squared()).collect();
        let kmax = m.min(n);
        let mut reflectors: Vec<(DVector<f64>, f64)> = Vec::with_capacity(kmax);

        for k in 0..kmax {
            let mut best = k;
            for j in k + 1..n {
                if norms[j] > norms[best] || (norms[j] == norms[best] && perm[j] < perm[best]) {
                    best = j;
                }
            }
            if best != k {
                r.swap_columns(k, best);
                norms.swap(k, best);
                perm.swap(k, best);
            }

            let x = r.view((k, k), (m - k, 1)).column(0).clone_owned();
            let xnorm = x.norm();
            let mut v = x;
            let beta = if xnorm == 0.0 {
                0.0
            } else {
                let alpha = if v[0] >= 0.0 { -xnorm } else { xnorm };
                v[0] -= alpha;
                let vv = v.norm_squared();
                if vv == 0.0 {
                    0.0
                } else {
                    2.0 / vv
                }
            };
            if beta != 0.0 {
                let mut block = r.view_mut((k, k), (m - k, n - k));
                let w = block.tr_mul(&v) * beta;
                block.ger(-1.0, &v, &w, 1.0);
            }
            for i in k + 1..m {
                r[(i, k)] = 0.0;
            }
            reflectors.push((v, beta));

            for j in k + 1..n {
                // Downdated norms drift; recompute once cancellation sets in.
                let updated = norms[j] - r[(k, j)] * r[(k, j)];
                norms[j] = if updated > 1e-8 * norms[j] {
                    updated
                } else {
                    r.view((k + 1, j), (m - k - 1, 1)).norm_squared()
                };
            }
        }

        let mut q = DMatrix::<f64>::identity(m, m);
        for (k, (v, beta)) in reflectors.iter().enumerate().rev() {
            if *beta == 0.0 {
                continue;
            }
            let mut block = q.view_mut((k, 0), (m - k, m));
            let w = block.tr_mul(v) * *beta;
            block.ger(-1.0, v, &w, 1.0);
        }

        let r00 = if kmax > 0 { r[(0, 0)].abs() } else { 0.0 };
        let rank = (0..kmax)
            .take_while(|&k| r00 > 0.0 && r[(k, k)].abs() > rel_tol * r00)
            .count();
        PivotedQr { q, r, perm, rank }
    }

    /// Orthonormal basis of the numerical range (first `rank` columns of `Q`).
    pub fn range_basis(&self) -> DMatrix<f64> {
        self.q.columns(0, self.rank).into_owned()
    }

    /// Orthonormal basis of the complement of the numerical range.
    pub fn complement_basis(&self) -> DMatrix<f64> {
        let m = self.q.nrows();
        self.q.columns(self.rank, m - self.rank).into_owned()
    }
}

/// Deterministic, non-degenerate start vector for Krylov iterations.
fn start_vector(n: usize) -> DVector<f64> {
    let golden = 0.618_033_988_749_894_9;
    let v = DVector::from_fn(n, |i, _| 1.0 + ((i as f64 + 1.0) * golden).fract());
    let norm = v.norm();
    v / norm
}

/// Largest eigenvalue of a symmetric positive semidefinite operator given
/// only through its action, by Lanczos with full reorthogonalization.
/// Returns the Ritz value and the number of iterations used.
pub fn lanczos_largest(
    n: usize,
    mut apply: impl FnMut(&DVector<f64>) -> DVector<f64>,
    max_iter: usize,
    rel_tol: f64,
) -> (f64, usize) {
    if n == 0 {
        return (0.0, 0);
    }
    let kmax = max_iter.min(n).max(1);
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(kmax);
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut q = start_vector(n);
    let mut theta_prev = f64::NAN;
    let mut theta = 0.0;
    for j in 0..kmax {
        let mut w = apply(&q);
        let alpha = q.dot(&w);
        basis.push(q.clone());
        alphas.push(alpha);
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&w);
                w.axpy(-c, b, 1.0);
            }
        }
        let beta = w.norm();

        let k = alphas.len();
        let mut t = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alphas[i];
            if i + 1 < k {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let (vals, _) = symmetric_eigen(&t);
        theta = *vals.last().unwrap();
        let converged = (theta - theta_prev).abs() <= rel_tol * theta.abs();
        if converged || beta <= 1e-14 * theta.abs().max(f64::MIN_POSITIVE) || j + 1 == kmax {
            return (theta, j + 1);
        }
        theta_prev = theta;
        betas.push(beta);
        q = w / beta;
    }
    (theta, kmax)
}

/// Plain power iteration with Rayleigh quotients; the slower, independent
/// route used to cross-check [`lanczos_largest`].
pub fn power_iteration_largest(
    n: usize,
    mut apply: impl FnMut(&DVector<f64>) -> DVector<f64>,
    max_iter: usize,
    rel_tol: f64,
) -> (f64, usize) {
    if n == 0 {
        return (0.0, 0);
    }
    let mut v = start_vector(n);
    let mut prev = f64::NAN;
    for it in 0..max_iter.max(1) {
        let w = apply(&v);
        let rq = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return (0.0, it + 1);
        }
        v = w / norm;
        if (rq - prev).abs() <= rel_tol * rq.abs() {
            return (rq, it + 1);
        }
        prev = rq;
    }
    (prev, max_iter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample(m: usize, n: usize, seed: u64) -> DMatrix<f64> {
        let mut s = seed;
        DMatrix::from_fn(m, n, |_, _| {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((s >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
        })
    }

    #[test]
    fn pivoted_qr_reconstructs_and_is_orthogonal() {
        let a = sample(9, 5, 3);
        let qr = PivotedQr::new(&a, 1e-12);
        assert_eq!(qr.rank, 5);
        let qtq = qr.q.transpose() * &qr.q;
        assert!(max_abs_diff(&qtq, &DMatrix::identity(9, 9)) < 1e-13);
        let mut ap = DMatrix::zeros(9, 5);
        for (k, &j) in qr.perm.iter().enumerate() {
            ap.set_column(k, &a.column(j));
        }
        assert!(max_abs_diff(&(&qr.q * &qr.r), &ap) < 1e-13);
        for k in 1..5 {
            assert!(qr.r[(k, k)].abs() <= qr.r[(k - 1, k - 1)].abs() + 1e-14);
        }
    }

    #[test]
    fn pivoted_qr_detects_rank_and_breaks_ties_by_index() {
        let b = sample(7, 2, 11);
        let mut a = DMatrix::zeros(7, 4);
        a.set_column(0, &b.column(0));
        a.set_column(1, &b.column(1));
        a.set_column(2, &(b.column(0) * 2.0 - b.column(1)));
        a.set_column(3, &b.column(1));
        let qr = PivotedQr::new(&a, 1e-10);
        assert_eq!(qr.rank, 2);
        let range = qr.range_basis();
        let proj = &range * range.transpose();
        assert!(max_abs_diff(&(&proj * &a), &a) < 1e-12);

        let e = DMatrix::<f64>::identity(4, 4);
        assert_eq!(PivotedQr::new(&e, 1e-12).perm, [0, 1, 2, 3]);
    }

    #[test]
    fn krylov_estimates_match_dense_eigenvalue() {
        let b = sample(40, 40, 5);
        let spd = b.transpose() * &b + DMatrix::identity(40, 40) * 0.1;
        let (vals, _) = symmetric_eigen(&spd);
        let top = *vals.last().unwrap();
        let (lz, _) = lanczos_largest(40, |v| &spd * v, 200, 1e-13);
        assert_relative_eq!(lz, top, max_relative = 1e-10);
        let (pw, _) = power_iteration_largest(40, |v| &spd * v, 100_000, 1e-14);
        assert_relative_eq!(pw, top, max_relative = 1e-6);
    }

    #[test]
    fn symmetric_square_root_squares_back() {
        let b = sample(6, 6, 9);
        let spd = b.transpose() * &b + DMatrix::identity(6, 6);
        let root = symmetric_function(&spd, f64::sqrt);
        assert!(max_abs_diff(&(&root * &root), &spd) < 1e-12);
        assert_relative_eq!(
            spectral_norm(&spd),
            *symmetric_eigen(&spd).0.last().unwrap(),
            max_relative = 1e-12
        );
    }
}
