//! Small dense linear-algebra helpers shared by the solver modules.
//!
//! Everything here is desk-scale (dimensions in the tens), so SVD- and
//! eigendecomposition-based routines are used throughout for rank decisions;
//! robustness matters more than speed.

use nalgebra::{DMatrix, DVector};

/// Relative singular-value cutoff used for rank decisions.
pub const RANK_TOL: f64 = 1e-11;

/// `max |a_ij|`, 0 for empty matrices.
pub fn amax(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `max |v_i|`, 0 for empty vectors.
pub fn vamax(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn is_symmetric(a: &DMatrix<f64>, tol: f64) -> bool {
    if !a.is_square() {
        return false;
    }
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (a[(i, j)] - a[(j, i)]).abs() > tol {
                return false;
            }
        }
    }
    true
}

/// Smallest eigenvalue of a symmetric matrix; `+inf` for the 0x0 matrix.
pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return f64::INFINITY;
    }
    let eig = a.clone().symmetric_eigen();
    eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Symmetric PSD square root via eigendecomposition; negative eigenvalues
/// (numerical noise) are floored at zero.
pub fn sym_sqrt(a: &DMatrix<f64>) -> DMatrix<f64> {
    if a.nrows() == 0 {
        return a.clone();
    }
    let eig = a.clone().symmetric_eigen();
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// Orthonormal basis of the null space of `a` (columns of the result).
/// For a matrix with zero rows this is the identity.
pub fn nullspace(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.ncols();
    if a.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    // pad with zero rows so the thin SVD carries all n right singular vectors
    let a = if a.nrows() < n {
        let mut padded = DMatrix::zeros(n, n);
        padded.rows_mut(0, a.nrows()).copy_from(a);
        padded
    } else {
        a.clone()
    };
    let svd = a.clone().svd(false, true);
    let vt = svd.v_t.expect("svd requested v_t");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = RANK_TOL * smax.max(1.0);
    let rank = svd.singular_values.iter().filter(|s| **s > cutoff).count();
    // rows rank..n of V^T span the null space
    let nz = n - rank;
    let mut z = DMatrix::zeros(n, nz);
    for (k, row) in (rank..n).enumerate() {
        z.set_column(k, &vt.row(row).transpose());
    }
    z
}

/// Minimum-norm least-squares solution of `a x = b` via SVD.
/// Returns the solution and the residual norm `||a x - b||_2`.
pub fn min_norm_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, f64) {
    let n = a.ncols();
    if a.nrows() == 0 {
        return (DVector::zeros(n), 0.0);
    }
    if n == 0 {
        return (DVector::zeros(0), b.norm());
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = RANK_TOL * smax.max(1.0);
    let x = svd
        .solve(b, cutoff)
        .unwrap_or_else(|_| DVector::zeros(n));
    let res = (a * &x - b).norm();
    (x, res)
}

/// Orthonormal basis (columns) of the row space of `a`.
pub fn row_space_basis(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.ncols();
    if a.nrows() == 0 || n == 0 {
        return DMatrix::zeros(n, 0);
    }
    let svd = a.clone().svd(false, true);
    let vt = svd.v_t.expect("svd requested v_t");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = RANK_TOL * smax.max(1.0);
    let rank = svd.singular_values.iter().filter(|s| **s > cutoff).count();
    let mut q = DMatrix::zeros(n, rank);
    for k in 0..rank {
        q.set_column(k, &vt.row(k).transpose());
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn nullspace_of_row() {
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]);
        let z = nullspace(&a);
        assert_eq!(z.ncols(), 2);
        let az = &a * &z;
        assert!(amax(&az) < 1e-12);
        // columns orthonormal
        let ztz = z.transpose() * &z;
        assert_relative_eq!(ztz[(0, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(ztz[(1, 1)], 1.0, epsilon = 1e-12);
        assert!(ztz[(0, 1)].abs() < 1e-12);
    }

    #[test]
    fn min_norm_consistent() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let b = DVector::from_row_slice(&[2.0, 3.0]);
        let (x, res) = min_norm_solve(&a, &b);
        assert!(res < 1e-12);
        assert_relative_eq!(x[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(x[1], 3.0, epsilon = 1e-12);
        assert_relative_eq!(x[2], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn min_norm_inconsistent_reports_residual() {
        // x = 0 and x = 1 simultaneously
        let a = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let b = DVector::from_row_slice(&[0.0, 1.0]);
        let (_, res) = min_norm_solve(&a, &b);
        assert!(res > 0.5);
    }

    #[test]
    fn sqrt_reconstructs() {
        let q = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0]);
        let d = sym_sqrt(&q);
        assert_relative_eq!(d[(0, 0)], 2.0, epsilon = 1e-12);
        assert_relative_eq!(d[(1, 1)], 1.0, epsilon = 1e-12);
        let r = &d * &d - q;
        assert!(amax(&r) < 1e-12);
    }
}
