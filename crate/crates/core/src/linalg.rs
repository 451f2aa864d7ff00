//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{GkError, Result};

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return f64::INFINITY;
    }
    symmetrize(a)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Inverse of a symmetric positive definite matrix.
pub fn spd_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    a.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| GkError::Numerical("matrix is not positive definite".into()))
}

/// Replace negative eigenvalues by zero. Returns the repaired matrix and the
/// total magnitude of the removed eigenvalues.
pub fn clip_psd(a: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let eig = symmetrize(a).symmetric_eigen();
    let mut removed = 0.0;
    let vals = eig.eigenvalues.map(|v| {
        if v < 0.0 {
            removed -= v;
            0.0
        } else {
            v
        }
    });
    let q = &eig.eigenvectors;
    let out = q * DMatrix::from_diagonal(&vals) * q.transpose();
    (symmetrize(&out), removed)
}

/// Lower-triangular `L` with `L Lᵀ = A` for a positive semidefinite `A`.
///
/// Pivots at or below `tol * max_diag` are treated as exact zeros and their
/// column is left empty, so rank-deficient inputs factor without jitter.
pub fn psd_cholesky(a: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let n = a.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
    let floor = tol * scale.max(f64::MIN_POSITIVE);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= floor {
            continue;
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    l
}

/// Clip a symmetric matrix to PSD and rescale it back to unit diagonal.
pub fn nearest_correlation_clip(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (c, _) = clip_psd(a);
    let d = DVector::from_iterator(
        c.nrows(),
        c.diagonal().iter().map(|&v| if v > 0.0 { 1.0 / v.sqrt() } else { 0.0 }),
    );
    let mut out = DMatrix::from_fn(c.nrows(), c.ncols(), |i, j| c[(i, j)] * d[i] * d[j]);
    for i in 0..out.nrows() {
        out[(i, i)] = 1.0;
    }
    out
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
