//! Synthetic recovery benchmark data: random unit-norm dictionary, K-sparse codes,
//! additive white Gaussian noise at a requested SNR.

use nalgebra::DMatrix;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::normalize_columns;

/// Number of active atoms per signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sparsity {
    Fixed(usize),
    /// `K_l` drawn uniformly from `min..=max` for every signal.
    UniformRange(usize, usize),
}

impl std::fmt::Display for Sparsity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Sparsity::Fixed(k) => write!(f, "{k}"),
            Sparsity::UniformRange(lo, hi) => write!(f, "{lo}-{hi}"),
        }
    }
}

impl std::str::FromStr for Sparsity {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim();
        let parse = |t: &str| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| format!("bad sparsity `{s}`"))
        };
        match s.split_once('-') {
            Some((lo, hi)) => Ok(Sparsity::UniformRange(parse(lo)?, parse(hi)?)),
            None => Ok(Sparsity::Fixed(parse(s)?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub m: usize,
    pub n: usize,
    pub l: usize,
    pub sparsity: Sparsity,
    /// Per-entry signal-to-noise power ratio in dB; `f64::INFINITY` means noiseless.
    pub snr_db: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 || self.l == 0 {
            return Err(Error::InvalidSpec("M, N and L must be at least 1".into()));
        }
        let (lo, hi) = match self.sparsity {
            Sparsity::Fixed(k) => (k, k),
            Sparsity::UniformRange(lo, hi) => (lo, hi),
        };
        if lo > hi {
            return Err(Error::InvalidSpec(format!(
                "sparsity range {lo}-{hi} is empty"
            )));
        }
        if hi > self.n {
            return Err(Error::InvalidSpec(format!(
                "sparsity {hi} exceeds the {} atoms",
                self.n
            )));
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(Error::InvalidSpec(format!("snr_db {}", self.snr_db)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    /// `M x N`, unit-norm columns.
    pub dictionary: DMatrix<f64>,
    /// `N x L`, exactly `K_l` nonzeros per column.
    pub codes: DMatrix<f64>,
    /// `M x L` noisy observations.
    pub signals: DMatrix<f64>,
    /// Noise standard deviation actually used.
    pub sigma: f64,
}

/// `sigma = sqrt(P / 10^(snr_db / 10))` with `P = |clean|_F^2 / (M L)`.
pub fn snr_to_noise_std(clean: &DMatrix<f64>, snr_db: f64) -> Result<f64> {
    if !snr_db.is_finite() {
        return Err(Error::InvalidSpec(format!("snr_db {snr_db} is not finite")));
    }
    let power = clean.norm_squared() / clean.len().max(1) as f64;
    if power == 0.0 {
        return Err(Error::ZeroSignal);
    }
    Ok((power / 10f64.powf(snr_db / 10.0)).sqrt())
}

fn nonzero_normal<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let v: f64 = StandardNormal.sample(rng);
        if v != 0.0 {
            return v;
        }
    }
}

/// Draws one benchmark instance; a pure function of `spec`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut dictionary = DMatrix::from_fn(spec.m, spec.n, |_, _| StandardNormal.sample(&mut rng));
    while !normalize_columns(&mut dictionary).is_empty() {
        dictionary = DMatrix::from_fn(spec.m, spec.n, |_, _| StandardNormal.sample(&mut rng));
    }

    let mut codes = DMatrix::zeros(spec.n, spec.l);
    for l in 0..spec.l {
        let k = match spec.sparsity {
            Sparsity::Fixed(k) => k,
            Sparsity::UniformRange(lo, hi) => rng.random_range(lo..=hi),
        };
        for idx in index::sample(&mut rng, spec.n, k) {
            codes[(idx, l)] = nonzero_normal(&mut rng);
        }
    }

    let clean = &dictionary * &codes;
    let sigma = if spec.snr_db.is_finite() {
        snr_to_noise_std(&clean, spec.snr_db)?
    } else {
        0.0
    };
    let signals = if sigma > 0.0 {
        clean.map(|v| {
            let z: f64 = StandardNormal.sample(&mut rng);
            v + sigma * z
        })
    } else {
        clean
    };
    Ok(SyntheticData {
        dictionary,
        codes,
        signals,
        sigma,
    })
}
