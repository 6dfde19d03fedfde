//! Patch-based denoising with a learned dictionary.
//!
//! Every overlapping patch (stride 1) is coded by OMP until its residual drops
//! below `gain * sigma * sqrt(patch^2)`, rebuilt from the code, and the image is
//! reassembled by averaging the estimates each pixel receives.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::image::{
    extract_patches, reassemble_image, remove_patch_means, restore_patch_means, DEFAULT_PATCH,
};
use crate::omp::{OmpEncoder, OmpStop};

pub const DEFAULT_GAIN: f64 = 1.15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenoiseOptions {
    /// Noise standard deviation in intensity units.
    pub sigma: f64,
    pub gain: f64,
    pub patch: usize,
    /// Code patches with their mean removed and add it back afterwards.
    pub remove_mean: bool,
}

impl DenoiseOptions {
    pub fn new(sigma: f64) -> Self {
        Self {
            sigma,
            gain: DEFAULT_GAIN,
            patch: DEFAULT_PATCH,
            remove_mean: false,
        }
    }

    pub fn threshold(&self) -> f64 {
        self.gain * self.sigma * self.patch as f64
    }
}

#[derive(Debug, Clone)]
pub struct Denoised {
    pub image: DMatrix<f64>,
    /// Average number of atoms per patch code.
    pub mean_sparsity: f64,
    /// True when the dictionary had to be renormalized for coding.
    pub normalized_dictionary: bool,
}

/// Estimates the noise level from the learned noise precision, `1 / sqrt(gamma)`.
pub fn sigma_from_precision(gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::NonFinite(format!("noise precision {gamma}")));
    }
    Ok(gamma.sqrt().recip())
}

/// Training signals from an image: patches at the given stride, optionally mean-removed.
pub fn training_patches(
    image: &DMatrix<f64>,
    patch: usize,
    stride: usize,
    remove_mean: bool,
) -> Result<DMatrix<f64>> {
    let (mut patches, _) = extract_patches(image, patch, stride)?;
    if remove_mean {
        remove_patch_means(&mut patches);
    }
    Ok(patches)
}

pub fn denoise_image(
    dict: &DMatrix<f64>,
    noisy: &DMatrix<f64>,
    opts: &DenoiseOptions,
) -> Result<Denoised> {
    let dim = opts.patch * opts.patch;
    if dict.nrows() != dim {
        return Err(Error::DimensionMismatch(format!(
            "dictionary atoms have length {}, {}x{} patches need {dim}",
            dict.nrows(),
            opts.patch,
            opts.patch
        )));
    }
    if !(opts.sigma >= 0.0 && opts.sigma.is_finite())
        || !(opts.gain >= 0.0 && opts.gain.is_finite())
    {
        return Err(Error::InvalidConfig(format!(
            "sigma {} and gain {} must be finite and non-negative",
            opts.sigma, opts.gain
        )));
    }
    let (mut patches, grid) = extract_patches(noisy, opts.patch, 1)?;
    let means = opts.remove_mean.then(|| remove_patch_means(&mut patches));

    let encoder = OmpEncoder::new(dict);
    let stop = OmpStop::threshold(opts.threshold());
    let mut atoms_used = 0usize;
    let mut normalized = false;
    let mut estimate = DMatrix::zeros(dim, patches.ncols());
    for (k, col) in patches.column_iter().enumerate() {
        let code = encoder.encode(col, &stop)?;
        normalized |= code.normalized;
        atoms_used += code.support.len();
        let sub = dict.select_columns(&code.support);
        let fit = sub * DVector::from_column_slice(&code.coeffs);
        estimate.set_column(k, &fit);
    }
    if let Some(means) = means {
        restore_patch_means(&mut estimate, &means);
    }
    Ok(Denoised {
        image: reassemble_image(&estimate, &grid)?,
        mean_sparsity: atoms_used as f64 / patches.ncols().max(1) as f64,
        normalized_dictionary: normalized,
    })
}
