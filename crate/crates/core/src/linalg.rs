use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix.
pub type CMatrix = DMatrix<Complex64>;
/// Dense complex column vector.
pub type CVector = DVector<Complex64>;

pub(crate) fn cis(phase: f64) -> Complex64 {
    Complex64::from_polar(1.0, phase)
}

pub(crate) fn cholesky(m: &CMatrix, what: &'static str) -> Result<Cholesky<Complex64, Dyn>> {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Singular(what));
    }
    let chol = Cholesky::new(m.clone()).ok_or(Error::Singular(what))?;
    // Complex square roots never fail, so an indefinite input shows up as
    // a non-real pivot rather than as `None`.
    let l = chol.l_dirty();
    let pivots_ok = (0..m.nrows()).all(|k| {
        let d = l[(k, k)];
        d.re > 0.0 && d.re.is_finite() && d.im.abs() <= 1e-12 * d.re
    });
    if pivots_ok {
        Ok(chol)
    } else {
        Err(Error::Singular(what))
    }
}

/// log2 det of a Hermitian positive-definite matrix.
pub(crate) fn log2_det_hpd(m: &CMatrix, what: &'static str) -> Result<f64> {
    let chol = cholesky(m, what)?;
    let l = chol.l_dirty();
    Ok((0..m.nrows()).map(|k| 2.0 * l[(k, k)].re.log2()).sum())
}

/// Solves `m x = b` for Hermitian positive-definite `m`.
pub(crate) fn solve_hpd(m: &CMatrix, b: &CVector, what: &'static str) -> Result<CVector> {
    Ok(cholesky(m, what)?.solve(b))
}

/// Largest entrywise deviation from Hermitian symmetry, relative to the
/// largest entry.
pub(crate) fn hermitian_defect(m: &CMatrix) -> f64 {
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst / scale
}

/// `sum_k p_k v_k v_k^H + noise_var * I` restricted to `rows`.
pub(crate) fn covariance_on(
    rows: &[usize],
    terms: &[(&CVector, f64)],
    noise_var: f64,
) -> CMatrix {
    let r = rows.len();
    let mut m = CMatrix::zeros(r, r);
    for (v, p) in terms {
        for (a, &ra) in rows.iter().enumerate() {
            let va = v[ra] * *p;
            for (b, &rb) in rows.iter().enumerate() {
                m[(a, b)] += va * v[rb].conj();
            }
        }
    }
    for k in 0..r {
        m[(k, k)] += noise_var;
    }
    m
}

/// In-place Cholesky of a row-major `n x n` Hermitian matrix held in `a`,
/// returning log2 det, or `None` when the matrix is not positive definite.
/// Only the lower triangle is read.
pub(crate) fn log2_det_hpd_in_place(a: &mut [Complex64], n: usize) -> Option<f64> {
    let mut acc = 0.0;
    for j in 0..n {
        let mut d = a[j * n + j].re;
        for k in 0..j {
            d -= a[j * n + k].norm_sqr();
        }
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        let ljj = d.sqrt();
        a[j * n + j] = Complex64::new(ljj, 0.0);
        acc += d.log2();
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k].conj();
            }
            a[i * n + j] = s / ljj;
        }
    }
    Some(acc)
}
