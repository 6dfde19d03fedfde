//! Symmetric positive-definite helpers shared by both inference engines.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};

/// Reciprocal of the atom prior variance; `beta = inf` yields 0.
#[inline]
pub(crate) fn prior_precision(beta: f64) -> f64 {
    1.0 / beta
}

/// Cholesky factor of a symmetric positive-definite matrix.
///
/// On failure a jitter of `1e-10 * trace / n` is added to the diagonal and
/// the factorization is retried once.
pub fn spd_cholesky(mut m: DMatrix<f64>, context: &'static str) -> Result<Cholesky<f64, Dyn>> {
    if let Some(chol) = Cholesky::new(m.clone()) {
        return Ok(chol);
    }
    let n = m.nrows().max(1);
    let jitter = 1e-10 * m.trace() / n as f64;
    if !(jitter.is_finite() && jitter > 0.0) {
        return Err(Error::SingularPrecision(context));
    }
    for i in 0..m.nrows() {
        m[(i, i)] += jitter;
    }
    Cholesky::new(m).ok_or(Error::SingularPrecision(context))
}

/// Inverse of an SPD matrix together with the log-determinant of that inverse.
pub fn spd_inverse(m: DMatrix<f64>, context: &'static str) -> Result<(DMatrix<f64>, f64)> {
    let chol = spd_cholesky(m, context)?;
    let logdet = chol_logdet(&chol);
    let mut inv = chol.inverse();
    symmetrize(&mut inv);
    Ok((inv, -logdet))
}

/// log det of the factored matrix.
pub fn chol_logdet(chol: &Cholesky<f64, Dyn>) -> f64 {
    let l = chol.l_dirty();
    2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
}

/// Replaces `m` by `(m + m^T) / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// `tr(A B)` without forming the product.
pub fn trace_of_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Scales every column of `m` to unit Euclidean norm. Zero columns are left untouched
/// and their indices returned.
pub fn normalize_columns(m: &mut DMatrix<f64>) -> Vec<usize> {
    let mut zero = Vec::new();
    for (j, mut col) in m.column_iter_mut().enumerate() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        } else {
            zero.push(j);
        }
    }
    zero
}
