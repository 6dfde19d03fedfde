//! Orthogonal matching pursuit.

use std::borrow::Cow;

use nalgebra::{DMatrix, DVector, DVectorView};

use crate::error::{Error, Result};

/// Unit-norm tolerance on dictionary columns before they are renormalized.
const UNIT_NORM_TOL: f64 = 1e-6;

/// Stop once an extra atom shrinks the residual by less than this fraction.
const MIN_RELATIVE_DECREASE: f64 = 1e-12;

/// Stopping rule; at least one criterion must be set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmpStop {
    pub max_sparsity: Option<usize>,
    pub residual_threshold: Option<f64>,
}

impl OmpStop {
    pub fn new(max_sparsity: Option<usize>, residual_threshold: Option<f64>) -> Result<Self> {
        if max_sparsity.is_none() && residual_threshold.is_none() {
            return Err(Error::InvalidConfig(
                "OMP needs a sparsity limit or a residual threshold".into(),
            ));
        }
        if max_sparsity == Some(0) {
            return Err(Error::InvalidConfig(
                "OMP sparsity limit must be positive".into(),
            ));
        }
        if let Some(t) = residual_threshold {
            if !(t >= 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "OMP threshold {t} is negative"
                )));
            }
        }
        Ok(Self {
            max_sparsity,
            residual_threshold,
        })
    }

    pub fn sparsity(k: usize) -> Self {
        Self {
            max_sparsity: Some(k),
            residual_threshold: None,
        }
    }

    pub fn threshold(t: f64) -> Self {
        Self {
            max_sparsity: None,
            residual_threshold: Some(t),
        }
    }

    /// Error-constrained rule for denoising: `gain * sigma * sqrt(M)`.
    pub fn for_noise(sigma: f64, gain: f64, dim: usize) -> Self {
        Self::threshold(gain * sigma * (dim as f64).sqrt())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseCode {
    /// Atom indices in selection order.
    pub support: Vec<usize>,
    /// Coefficients aligned with `support`, relative to the dictionary as given.
    pub coeffs: Vec<f64>,
    pub residual_norm: f64,
    /// Set when the dictionary columns were not unit norm and had to be rescaled.
    pub normalized: bool,
}

impl SparseCode {
    pub fn to_dense(&self, num_atoms: usize) -> DVector<f64> {
        let mut x = DVector::zeros(num_atoms);
        for (&i, &c) in self.support.iter().zip(&self.coeffs) {
            x[i] = c;
        }
        x
    }
}

/// A dictionary prepared for repeated encoding.
pub struct OmpEncoder<'a> {
    unit: Cow<'a, DMatrix<f64>>,
    norms: Vec<f64>,
    normalized: bool,
}

impl<'a> OmpEncoder<'a> {
    pub fn new(dict: &'a DMatrix<f64>) -> Self {
        let norms: Vec<f64> = dict.column_iter().map(|c| c.norm()).collect();
        let unit_already = norms.iter().all(|n| (n - 1.0).abs() <= UNIT_NORM_TOL);
        if unit_already {
            return Self {
                unit: Cow::Borrowed(dict),
                norms: vec![1.0; dict.ncols()],
                normalized: false,
            };
        }
        let mut unit = dict.clone();
        for (mut col, &n) in unit.column_iter_mut().zip(&norms) {
            if n > 0.0 {
                col /= n;
            }
        }
        Self {
            unit: Cow::Owned(unit),
            norms,
            normalized: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.unit.nrows()
    }

    pub fn encode(&self, y: DVectorView<'_, f64>, stop: &OmpStop) -> Result<SparseCode> {
        let dict = self.unit.as_ref();
        let (m, n) = dict.shape();
        if y.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "signal has length {}, dictionary atoms {}",
                y.len(),
                m
            )));
        }
        let threshold = stop.residual_threshold.unwrap_or(0.0);
        let limit = stop.max_sparsity.unwrap_or(usize::MAX).min(m).min(n);

        let mut support: Vec<usize> = Vec::new();
        let mut coeffs: Vec<f64> = Vec::new();
        let mut residual: DVector<f64> = y.into_owned();
        let mut rnorm = residual.norm();
        let mut chosen = vec![false; n];

        while rnorm > threshold && rnorm > 0.0 && support.len() < limit {
            let corr = dict.tr_mul(&residual);
            let mut best = None;
            let mut best_abs = 0.0;
            for (j, c) in corr.iter().enumerate() {
                if !chosen[j] && c.abs() > best_abs {
                    best_abs = c.abs();
                    best = Some(j);
                }
            }
            let Some(j) = best else { break };
            support.push(j);
            let sub = dict.select_columns(&support);
            let Some(chol) = (sub.tr_mul(&sub)).cholesky() else {
                support.pop();
                break;
            };
            let c = chol.solve(&sub.tr_mul(&y));
            let r = y - &sub * &c;
            let rn = r.norm();
            if rnorm - rn < MIN_RELATIVE_DECREASE * rnorm {
                support.pop();
                break;
            }
            chosen[j] = true;
            coeffs = c.iter().copied().collect();
            residual = r;
            rnorm = rn;
        }

        let coeffs = support
            .iter()
            .zip(&coeffs)
            .map(|(&j, &c)| c / self.norms[j])
            .collect();
        Ok(SparseCode {
            support,
            coeffs,
            residual_norm: rnorm,
            normalized: self.normalized,
        })
    }
}

/// Greedy sparse code of `y`: select the atom most correlated with the residual,
/// refit all selected coefficients by least squares, repeat until `stop` fires
/// or the residual no longer decreases. Correlation ties go to the lowest index.
pub fn omp_encode(
    dict: &DMatrix<f64>,
    y: DVectorView<'_, f64>,
    stop: &OmpStop,
) -> Result<SparseCode> {
    OmpEncoder::new(dict).encode(y, stop)
}

/// Encodes every column of `signals` independently, in column order.
pub fn batch_encode(
    dict: &DMatrix<f64>,
    signals: &DMatrix<f64>,
    stop: &OmpStop,
) -> Result<Vec<SparseCode>> {
    if signals.nrows() != dict.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "signals have length {}, dictionary atoms {}",
            signals.nrows(),
            dict.nrows()
        )));
    }
    let encoder = OmpEncoder::new(dict);
    signals
        .column_iter()
        .map(|col| encoder.encode(col, stop))
        .collect()
}
