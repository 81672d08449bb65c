//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Largest eigenvalue modulus of a square matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    if !m.is_square() {
        return Err(crate::error::dim_err(
            "spectral_radius",
            "square matrix",
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("spectral_radius input"));
    }
    Ok(spectral_radius_unchecked(m))
}

pub(crate) fn spectral_radius_unchecked(m: &DMatrix<f64>) -> f64 {
    match m.nrows() {
        0 => 0.0,
        1 => m[(0, 0)].abs(),
        2 => {
            // closed form keeps 2x2 products exact enough and fast
            let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
            let tr = a + d;
            let det = a * d - b * c;
            let disc = tr * tr - 4.0 * det;
            if disc >= 0.0 {
                let s = disc.sqrt();
                let r1 = (tr + s) * 0.5;
                let r2 = (tr - s) * 0.5;
                r1.abs().max(r2.abs())
            } else {
                det.abs().sqrt()
            }
        }
        _ => m
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max),
    }
}

/// Operator 2-norm (largest singular value).
pub fn op_norm2(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    match (m.nrows(), m.ncols()) {
        (1, 1) => m[(0, 0)].abs(),
        (2, 2) => {
            let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
            0.5 * ((a + d).hypot(c - b) + (a - d).hypot(b + c))
        }
        _ => m.singular_values().iter().copied().fold(0.0, f64::max),
    }
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_sym_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return f64::INFINITY;
    }
    let s = symmetrize(m);
    s.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Symmetric square root of a positive semidefinite matrix.
///
/// Eigenvalues below `-neg_tol` are rejected; the rest are clamped to zero.
pub fn psd_sqrt(m: &DMatrix<f64>, neg_tol: f64) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(crate::error::dim_err(
            "psd_sqrt",
            "square matrix",
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    let eig = symmetrize(m).symmetric_eigen();
    if let Some(&lmin) = eig
        .eigenvalues
        .iter()
        .min_by(|a, b| a.total_cmp(b))
    {
        if lmin < -neg_tol {
            return Err(Error::InvalidParameter(format!(
                "covariance has negative eigenvalue {lmin:.3e}"
            )));
        }
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&roots) * v.transpose())
}

pub fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}
