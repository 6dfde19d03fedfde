//! Grayscale images: binary PGM files, overlapping patches, and averaging reassembly.
//!
//! Images are `rows x cols` matrices of intensities in `[0, 255]`. Patches are
//! vectorized column by column, and the patch matrix lists origins row by row.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub const MAX_INTENSITY: f64 = 255.0;

/// Patch side length used for denoising.
pub const DEFAULT_PATCH: usize = 8;

struct Header {
    width: usize,
    height: usize,
    data_start: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let mut pos = 0;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err(Error::MalformedHeader("header ends early".into()));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if tokens[0] != "P5" {
        return Err(Error::MalformedHeader(format!(
            "magic `{}`, expected P5",
            tokens[0]
        )));
    }
    let num = |t: &str, what: &str| {
        t.parse::<u32>()
            .map_err(|_| Error::MalformedHeader(format!("{what} `{t}` is not a number")))
    };
    let width = num(&tokens[1], "width")? as usize;
    let height = num(&tokens[2], "height")? as usize;
    let maxval = num(&tokens[3], "maxval")?;
    if maxval != 255 {
        return Err(Error::UnsupportedMaxval(maxval));
    }
    if width == 0 || height == 0 {
        return Err(Error::MalformedHeader(format!(
            "empty image {width}x{height}"
        )));
    }
    // exactly one whitespace byte separates the header from the raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::MalformedHeader("no raster after header".into()));
    }
    Ok(Header {
        width,
        height,
        data_start: pos + 1,
    })
}

/// Decodes an 8-bit binary PGM held in memory.
pub fn decode_pgm(bytes: &[u8]) -> Result<DMatrix<f64>> {
    let h = parse_header(bytes)?;
    let raster = &bytes[h.data_start..];
    let need = h.width * h.height;
    if raster.len() < need {
        return Err(Error::MalformedHeader(format!(
            "raster has {} bytes, header promises {need}",
            raster.len()
        )));
    }
    Ok(DMatrix::from_fn(h.height, h.width, |r, c| {
        raster[r * h.width + c] as f64
    }))
}

/// Encodes to P5 with maxval 255, rounding half away from zero and clamping.
pub fn encode_pgm(image: &DMatrix<f64>) -> Result<Vec<u8>> {
    if image.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("image has non-finite pixels".into()));
    }
    let (rows, cols) = image.shape();
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    out.reserve(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            out.push(image[(r, c)].round().clamp(0.0, MAX_INTENSITY) as u8);
        }
    }
    Ok(out)
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    decode_pgm(&fs::read(path)?)
}

pub fn save_pgm(image: &DMatrix<f64>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_pgm(image)?)?;
    Ok(())
}

/// Placement of square patches on a square image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchGrid {
    pub patch_size: usize,
    pub stride: usize,
    pub origin_rows: Vec<usize>,
    pub origin_cols: Vec<usize>,
    pub image_dims: (usize, usize),
}

impl PatchGrid {
    /// Origins at `0, r, 2r, ...` up to `Q - patch` on both axes.
    pub fn new(side: usize, patch_size: usize, stride: usize) -> Result<Self> {
        if patch_size == 0 || stride == 0 {
            return Err(Error::InvalidConfig(format!(
                "patch size {patch_size} and stride {stride} must be positive"
            )));
        }
        if side < patch_size {
            return Err(Error::ImageTooSmall {
                size: side,
                patch: patch_size,
            });
        }
        let origins: Vec<usize> = (0..=side - patch_size).step_by(stride).collect();
        Ok(Self {
            patch_size,
            stride,
            origin_rows: origins.clone(),
            origin_cols: origins,
            image_dims: (side, side),
        })
    }

    pub fn num_patches(&self) -> usize {
        self.origin_rows.len() * self.origin_cols.len()
    }

    pub fn patch_dim(&self) -> usize {
        self.patch_size * self.patch_size
    }

    /// Top-left corners in patch-matrix column order.
    pub fn origins(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.origin_rows
            .iter()
            .flat_map(move |&r| self.origin_cols.iter().map(move |&c| (r, c)))
    }
}

fn square_side(image: &DMatrix<f64>) -> Result<usize> {
    if image.nrows() != image.ncols() {
        return Err(Error::NotSquare {
            rows: image.nrows(),
            cols: image.ncols(),
        });
    }
    Ok(image.nrows())
}

/// Every `patch x patch` block whose origin lies on the stride-`stride` grid,
/// as columns of a `patch^2 x P` matrix.
pub fn extract_patches(
    image: &DMatrix<f64>,
    patch: usize,
    stride: usize,
) -> Result<(DMatrix<f64>, PatchGrid)> {
    let grid = PatchGrid::new(square_side(image)?, patch, stride)?;
    let mut out = DMatrix::zeros(grid.patch_dim(), grid.num_patches());
    for (k, (r0, c0)) in grid.origins().enumerate() {
        let block = image.view((r0, c0), (patch, patch));
        out.column_mut(k)
            .copy_from_slice(block.clone_owned().as_slice());
    }
    Ok((out, grid))
}

/// Averages overlapping patches back into an image without clamping.
pub fn reassemble_unclamped(patches: &DMatrix<f64>, grid: &PatchGrid) -> Result<DMatrix<f64>> {
    let p = grid.patch_size;
    if patches.shape() != (grid.patch_dim(), grid.num_patches()) {
        return Err(Error::ShapeMismatch(format!(
            "patch matrix is {:?}, grid expects {}x{}",
            patches.shape(),
            grid.patch_dim(),
            grid.num_patches()
        )));
    }
    let (rows, cols) = grid.image_dims;
    let mut sum = DMatrix::<f64>::zeros(rows, cols);
    let mut count = DMatrix::<u32>::zeros(rows, cols);
    for (k, (r0, c0)) in grid.origins().enumerate() {
        let col = patches.column(k);
        for dc in 0..p {
            for dr in 0..p {
                sum[(r0 + dr, c0 + dc)] += col[dc * p + dr];
                count[(r0 + dr, c0 + dc)] += 1;
            }
        }
    }
    for c in 0..cols {
        for r in 0..rows {
            match count[(r, c)] {
                0 => return Err(Error::CoverageGap { row: r, col: c }),
                n => sum[(r, c)] /= n as f64,
            }
        }
    }
    Ok(sum)
}

/// [`reassemble_unclamped`] followed by clamping to `[0, 255]`.
pub fn reassemble_image(patches: &DMatrix<f64>, grid: &PatchGrid) -> Result<DMatrix<f64>> {
    Ok(reassemble_unclamped(patches, grid)?.map(|v| v.clamp(0.0, MAX_INTENSITY)))
}

/// Subtracts each column's mean in place and returns the means.
pub fn remove_patch_means(patches: &mut DMatrix<f64>) -> Vec<f64> {
    patches
        .column_iter_mut()
        .map(|mut col| {
            let mean = col.mean();
            col.add_scalar_mut(-mean);
            mean
        })
        .collect()
}

pub fn restore_patch_means(patches: &mut DMatrix<f64>, means: &[f64]) {
    for (mut col, &m) in patches.column_iter_mut().zip(means) {
        col.add_scalar_mut(m);
    }
}

/// Adds i.i.d. `N(0, sigma^2)` noise; no rounding or clamping.
pub fn add_gaussian_noise(image: &DMatrix<f64>, sigma: f64, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    image.map(|v| {
        let z: f64 = StandardNormal.sample(&mut rng);
        v + sigma * z
    })
}
