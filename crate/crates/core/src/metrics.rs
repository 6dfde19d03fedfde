//! Atom distance, recovery success rate, PSNR and reconstruction error.

use nalgebra::{DMatrix, DVectorView};

use crate::error::{Error, Result};

/// Success threshold on [`atom_distance`] for counting an atom as recovered.
pub const DEFAULT_SUCCESS_THRESHOLD: f64 = 0.01;

/// `1 - |d^T e| / (|d| |e|)`; invariant to sign and positive scale of either argument.
pub fn atom_distance(d: DVectorView<'_, f64>, dhat: DVectorView<'_, f64>) -> Result<f64> {
    if d.len() != dhat.len() {
        return Err(Error::ShapeMismatch(format!(
            "atoms of length {} and {}",
            d.len(),
            dhat.len()
        )));
    }
    let (nd, ne) = (d.norm(), dhat.norm());
    if nd == 0.0 || ne == 0.0 {
        return Err(Error::ZeroVector);
    }
    let cos = (d.dot(&dhat).abs() / (nd * ne)).min(1.0);
    Ok(1.0 - cos)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryReport {
    /// `(true_index, learned_index, distance)` in the order the pairs were matched.
    pub matched_pairs: Vec<(usize, usize, f64)>,
    pub success_rate: f64,
    pub threshold: f64,
}

impl RecoveryReport {
    pub fn recovered(&self) -> usize {
        self.matched_pairs
            .iter()
            .filter(|p| p.2 < self.threshold)
            .count()
    }
}

/// Greedy one-to-one matching of learned atoms to true atoms.
///
/// Repeatedly takes the globally closest remaining `(true, learned)` pair and
/// removes both from the pool. Ties go to the lower true index, then the lower
/// learned index. A zero learned atom sits at distance 1 from everything.
pub fn match_and_score(
    d_true: &DMatrix<f64>,
    d_learned: &DMatrix<f64>,
    threshold: f64,
) -> Result<RecoveryReport> {
    if d_true.nrows() != d_learned.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "true atoms have length {}, learned atoms {}",
            d_true.nrows(),
            d_learned.nrows()
        )));
    }
    let (nt, nl) = (d_true.ncols(), d_learned.ncols());
    let mut pairs = Vec::with_capacity(nt * nl);
    for i in 0..nt {
        for j in 0..nl {
            let dist = match atom_distance(d_true.column(i), d_learned.column(j)) {
                Ok(v) => v,
                Err(Error::ZeroVector) => 1.0,
                Err(e) => return Err(e),
            };
            pairs.push((dist, i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut true_used = vec![false; nt];
    let mut learned_used = vec![false; nl];
    let mut matched = Vec::with_capacity(nt.min(nl));
    for (dist, i, j) in pairs {
        if matched.len() == nt.min(nl) {
            break;
        }
        if true_used[i] || learned_used[j] {
            continue;
        }
        true_used[i] = true;
        learned_used[j] = true;
        matched.push((i, j, dist));
    }
    let hits = matched.iter().filter(|p| p.2 < threshold).count();
    let success_rate = if nt == 0 {
        0.0
    } else {
        hits as f64 / nt as f64
    };
    Ok(RecoveryReport {
        matched_pairs: matched,
        success_rate,
        threshold,
    })
}

fn frobenius_error(clean: &DMatrix<f64>, test: &DMatrix<f64>) -> Result<f64> {
    if clean.shape() != test.shape() {
        return Err(Error::ShapeMismatch(format!(
            "images are {:?} and {:?}",
            clean.shape(),
            test.shape()
        )));
    }
    Ok((test - clean).norm())
}

/// `20 log10(255 Q^2 / |U_hat - U|_F)` for `Q x Q` images, exactly as printed
/// in the denoising tables' definition. Returns `+inf` for identical images.
///
/// This equals [`psnr_conventional`] plus `20 log10(Q)`; differences between
/// two results on the same image size are unaffected.
pub fn psnr(clean: &DMatrix<f64>, test: &DMatrix<f64>) -> Result<f64> {
    if clean.nrows() != clean.ncols() {
        return Err(Error::NotSquare {
            rows: clean.nrows(),
            cols: clean.ncols(),
        });
    }
    let err = frobenius_error(clean, test)?;
    let q = clean.nrows() as f64;
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(20.0 * (255.0 * q * q / err).log10())
}

/// Mean-squared-error PSNR, `10 log10(255^2 / MSE)`. Any image shape.
pub fn psnr_conventional(clean: &DMatrix<f64>, test: &DMatrix<f64>) -> Result<f64> {
    let err = frobenius_error(clean, test)?;
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    let mse = err * err / clean.len() as f64;
    Ok(10.0 * (255.0 * 255.0 / mse).log10())
}

/// `|Y - D X|_F`.
pub fn reconstruction_error(y: &DMatrix<f64>, d: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<f64> {
    if d.ncols() != x.nrows() || y.nrows() != d.nrows() || y.ncols() != x.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "Y {:?}, D {:?}, X {:?}",
            y.shape(),
            d.shape(),
            x.shape()
        )));
    }
    Ok((y - d * x).norm())
}
