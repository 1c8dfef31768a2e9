//! Realification of complex Hermitian matrices.
//!
//! The interior-point engine works on real symmetric blocks; Hermitian data
//! enters through the standard embedding [Re H, -Im H; Im H, Re H]. The
//! embedding doubles inner products, which the solver front-end compensates
//! by halving coefficient matrices, so values reported to callers match the
//! complex formulation.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::SdpError;

/// Max deviation from Hermitian symmetry.
pub fn hermitian_defect(h: &DMatrix<Complex64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..h.nrows() {
        for j in 0..h.ncols() {
            worst = worst.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Real symmetric embedding of a Hermitian matrix; PSD iff the input is PSD,
/// with every eigenvalue duplicated.
pub fn embed_hermitian(h: &DMatrix<Complex64>) -> Result<DMatrix<f64>, SdpError> {
    if h.nrows() != h.ncols() {
        return Err(SdpError::InvalidProblem("matrix must be square".into()));
    }
    let defect = hermitian_defect(h);
    if defect > 1e-12 * h.norm().max(1.0) {
        return Err(SdpError::NotHermitian(defect));
    }
    let n = h.nrows();
    let mut e = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let re = 0.5 * (h[(i, j)].re + h[(j, i)].re);
            let im = 0.5 * (h[(i, j)].im - h[(j, i)].im);
            e[(i, j)] = re;
            e[(n + i, n + j)] = re;
            e[(i, n + j)] = -im;
            e[(n + i, j)] = im;
        }
    }
    Ok(e)
}

/// Inverse of [`embed_hermitian`] for (approximately) structured symmetric
/// matrices: averages the two real copies and the two imaginary copies, which
/// also projects out any component the embedding symmetry cannot represent.
pub fn derealify(e: &DMatrix<f64>) -> DMatrix<Complex64> {
    let n = e.nrows() / 2;
    let mut h = DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let re = 0.5 * (e[(i, j)] + e[(n + i, n + j)]);
            let im = 0.5 * (e[(n + i, j)] - e[(i, n + j)]);
            h[(i, j)] = Complex64::new(re, im);
        }
    }
    // hermitize to remove roundoff asymmetry
    let ha = h.adjoint();
    (h + ha) * Complex64::new(0.5, 0.0)
}
