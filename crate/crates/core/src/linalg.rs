//! Small dense least-squares helpers.

use nalgebra::{DMatrix, DVector};

const JACOBI_MAX_SWEEPS: usize = 60;

/// Singular value decomposition by one-sided Jacobi rotations.
///
/// Returns `A V` (columns orthogonal, norms equal to the singular values) and
/// the full orthogonal `V`. The nalgebra decomposition loses accuracy on
/// exactly rank-deficient inputs such as two parallel columns, which is the
/// common case for the uniaxial design matrices.
pub(crate) fn jacobi_svd(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.ncols();
    let mut u = a.clone();
    let mut v = DMatrix::identity(n, n);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = u.column(p).norm_squared();
                let beta = u.column(q).norm_squared();
                let gamma = u.column(p).dot(&u.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for m in [&mut u, &mut v] {
                    for r in 0..m.nrows() {
                        let (x, y) = (m[(r, p)], m[(r, q)]);
                        m[(r, p)] = c * x - s * y;
                        m[(r, q)] = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    (u, v)
}

/// Minimum-norm least-squares solution of `A x = b`.
///
/// Singular values at or below `rel_cutoff · σ_max` are discarded. Returns the
/// solution and the numerical rank.
pub fn min_norm_lstsq(a: &DMatrix<f64>, b: &DVector<f64>, rel_cutoff: f64) -> (DVector<f64>, usize) {
    let (u, v) = jacobi_svd(a);
    let sigma: Vec<f64> = u.column_iter().map(|c| c.norm()).collect();
    let sigma_max = sigma.iter().copied().fold(0.0, f64::max);
    if sigma_max == 0.0 || !sigma_max.is_finite() {
        return (DVector::zeros(a.ncols()), 0);
    }
    let tol = rel_cutoff * sigma_max;
    let mut x = DVector::zeros(a.ncols());
    let mut rank = 0;
    for (k, &s) in sigma.iter().enumerate() {
        if s > tol {
            rank += 1;
            x += v.column(k) * (u.column(k).dot(b) / (s * s));
        }
    }
    (x, rank)
}

/// Right singular vectors spanning the numerical null space of `A`.
pub fn null_space(a: &DMatrix<f64>, rel_cutoff: f64) -> Vec<DVector<f64>> {
    let (u, v) = jacobi_svd(a);
    let sigma: Vec<f64> = u.column_iter().map(|c| c.norm()).collect();
    let sigma_max = sigma.iter().copied().fold(0.0, f64::max);
    let tol = rel_cutoff * sigma_max.max(f64::MIN_POSITIVE);
    sigma
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= tol)
        .map(|(k, _)| v.column(k).into_owned())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overdetermined_consistent_system() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0, -1.0, 1.0]);
        let (x, rank) = min_norm_lstsq(&a, &b, 1e-10);
        assert_eq!(rank, 2);
        assert!((x[0] - 2.0).abs() < 1e-12 && (x[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn underdetermined_picks_minimum_norm() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0]);
        let (x, rank) = min_norm_lstsq(&a, &b, 1e-10);
        assert_eq!(rank, 1);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn parallel_columns_reproduce_a_consistent_right_hand_side() {
        let g = [0.09818975767764127, -0.05757475582268978, -0.05757475582268978, 0.0, 0.0, 0.0];
        let h: Vec<f64> = g.iter().map(|v| 2.0603 * v).collect();
        let a = DMatrix::from_fn(6, 2, |r, c| if c == 0 { g[r] } else { h[r] });
        let b = DVector::from_fn(6, |r, _| 0.7 * g[r] + 0.4 * h[r]);
        let (x, rank) = min_norm_lstsq(&a, &b, 1e-10);
        assert_eq!(rank, 1);
        assert!((&a * &x - &b).norm() <= 1e-13 * b.norm());
    }

    #[test]
    fn jacobi_decomposition_recomposes() {
        let a = DMatrix::from_row_slice(4, 3, &[1.0, 2.0, 3.0, -1.0, 0.5, 2.0, 0.0, 1.0, 1.0, 2.0, 4.0, 6.0]);
        let (u, v) = jacobi_svd(&a);
        assert!((&u * v.transpose() - &a).norm() < 1e-13);
        assert!((v.transpose() * &v - DMatrix::identity(3, 3)).norm() < 1e-13);
        let g = u.transpose() * &u;
        assert!((g[(0, 1)].abs() + g[(0, 2)].abs() + g[(1, 2)].abs()) < 1e-12);
    }

    #[test]
    fn zero_matrix() {
        let a = DMatrix::zeros(2, 2);
        let (x, rank) = min_norm_lstsq(&a, &DVector::from_vec(vec![1.0, 1.0]), 1e-10);
        assert_eq!(rank, 0);
        assert_eq!(x.norm(), 0.0);
    }

    #[test]
    fn null_space_of_rank_one() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let ns = null_space(&a, 1e-10);
        assert_eq!(ns.len(), 1);
        assert!((&a * &ns[0]).norm() < 1e-12);
    }
}
