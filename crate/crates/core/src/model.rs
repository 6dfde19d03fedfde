//! Hierarchical model types, prior hyperparameters and state initialization.
//!
//! All Gamma distributions use the shape–rate parameterization: density
//! proportional to `t^(shape-1) exp(-rate t)`, mean `shape / rate`.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::normalize_columns;

/// RNG stream reserved for dictionary initialization; the Gibbs chain uses stream 0.
const INIT_STREAM: u64 = 1;

/// Standard deviation of the perturbation applied to recycled training columns.
const RECYCLE_JITTER: f64 = 0.01;

/// How a dictionary point estimate is read out of a Gibbs chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DictEstimate {
    LastSample,
    /// Entrywise mean of the last `k` kept samples.
    AverageTail(usize),
}

impl std::fmt::Display for DictEstimate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DictEstimate::LastSample => write!(f, "last_sample"),
            DictEstimate::AverageTail(k) => write!(f, "average_tail:{k}"),
        }
    }
}

impl std::str::FromStr for DictEstimate {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim();
        if s == "last_sample" {
            return Ok(DictEstimate::LastSample);
        }
        if let Some(k) = s.strip_prefix("average_tail:") {
            let k: usize = k.parse().map_err(|_| format!("bad tail length in `{s}`"))?;
            return Ok(DictEstimate::AverageTail(k));
        }
        Err(format!(
            "unknown dictionary estimate `{s}` (expected last_sample or average_tail:K)"
        ))
    }
}

/// Prior hyperparameters and run budgets.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Gamma shape of the coefficient-precision prior.
    pub a: f64,
    /// Gamma rate of the coefficient-precision prior.
    pub b: f64,
    /// Gamma shape of the noise-precision prior.
    pub c: f64,
    /// Gamma rate of the noise-precision prior.
    pub d: f64,
    /// Prior variance of every dictionary entry; `f64::INFINITY` gives a flat prior.
    pub beta: f64,
    pub num_atoms: usize,
    pub max_iters: usize,
    /// Gibbs only.
    pub burn_in: usize,
    /// Gibbs only; keep every `thinning`-th post-burn-in sample.
    pub thinning: usize,
    /// VB only; relative Frobenius change of the dictionary mean.
    pub tol: f64,
    pub seed: u64,
    pub dict_estimate: DictEstimate,
}

impl ModelConfig {
    /// Settings used for the variational engine: `a = c = 0.5`, `b = d = 1e-6`, `beta = 1e8`.
    pub fn vb_defaults(num_atoms: usize) -> Self {
        Self {
            a: 0.5,
            b: 1e-6,
            c: 0.5,
            d: 1e-6,
            beta: 1e8,
            num_atoms,
            max_iters: 500,
            burn_in: 0,
            thinning: 1,
            tol: 1e-6,
            seed: 0,
            dict_estimate: DictEstimate::LastSample,
        }
    }

    /// Settings used for the Gibbs engine: same Gamma priors, `beta = 1`, 300 iterations.
    pub fn gibbs_defaults(num_atoms: usize) -> Self {
        Self {
            beta: 1.0,
            max_iters: 300,
            burn_in: 250,
            ..Self::vb_defaults(num_atoms)
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Observation matrix `Y` with one training signal per column.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    y: DMatrix<f64>,
}

impl TrainingSet {
    pub fn new(y: DMatrix<f64>) -> Result<Self> {
        if let Some(pos) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "training entry {} is {}",
                pos,
                y.iter().nth(pos).unwrap()
            )));
        }
        Ok(Self { y })
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    /// Signal dimension `M`.
    pub fn dim(&self) -> usize {
        self.y.nrows()
    }

    /// Number of training signals `L`.
    pub fn len(&self) -> usize {
        self.y.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.y
    }
}

/// Problem dimensions recorded by [`validate_config`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub m: usize,
    pub n: usize,
    pub l: usize,
}

/// Checks the configuration invariants against a training set.
pub fn validate_config(cfg: &ModelConfig, data: &TrainingSet) -> Result<Dims> {
    for (name, value) in [("a", cfg.a), ("b", cfg.b), ("c", cfg.c), ("d", cfg.d)] {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::NonPositiveHyperparameter(name));
        }
    }
    if !(cfg.beta > 0.0) {
        return Err(Error::NonPositiveHyperparameter("beta"));
    }
    if cfg.num_atoms == 0 {
        return Err(Error::InvalidConfig("num_atoms must be at least 1".into()));
    }
    if cfg.max_iters == 0 {
        return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
    }
    if cfg.burn_in >= cfg.max_iters {
        return Err(Error::BurnInExceedsIterations {
            burn_in: cfg.burn_in,
            max_iters: cfg.max_iters,
        });
    }
    if cfg.thinning == 0 {
        return Err(Error::InvalidConfig("thinning must be at least 1".into()));
    }
    if !(cfg.tol >= 0.0 && cfg.tol.is_finite()) {
        return Err(Error::InvalidConfig(
            "tol must be finite and non-negative".into(),
        ));
    }
    if cfg.dict_estimate == DictEstimate::AverageTail(0) {
        return Err(Error::InvalidConfig(
            "average_tail needs at least one sample".into(),
        ));
    }
    if data.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    Ok(Dims {
        m: data.dim(),
        n: cfg.num_atoms,
        l: data.len(),
    })
}

/// Variational posterior: Gaussian codes, row-Gaussian dictionary, Gamma precisions.
#[derive(Debug, Clone, PartialEq)]
pub struct VbState {
    pub code_means: Vec<DVector<f64>>,
    pub code_covs: Vec<DMatrix<f64>>,
    pub dict_mean: DMatrix<f64>,
    /// Covariance shared by every dictionary row. Diagonal after an atomwise update.
    pub dict_row_cov: DMatrix<f64>,
    pub alpha_shape: f64,
    /// `N x L` rates of the coefficient-precision posteriors.
    pub alpha_rates: DMatrix<f64>,
    pub gamma_shape: f64,
    pub gamma_rate: f64,
}

impl VbState {
    pub fn num_atoms(&self) -> usize {
        self.dict_mean.ncols()
    }

    pub fn num_signals(&self) -> usize {
        self.code_means.len()
    }

    /// `<gamma> = shape / rate`.
    pub fn gamma_mean(&self) -> f64 {
        self.gamma_shape / self.gamma_rate
    }

    /// `<alpha_nl> = shape / rate_nl`.
    pub fn alpha_mean(&self) -> DMatrix<f64> {
        self.alpha_rates.map(|r| self.alpha_shape / r)
    }

    /// Code means stacked into the `N x L` matrix `<X>`.
    pub fn code_mean_matrix(&self) -> DMatrix<f64> {
        let n = self.num_atoms();
        let mut x = DMatrix::zeros(n, self.code_means.len());
        for (l, mu) in self.code_means.iter().enumerate() {
            x.set_column(l, mu);
        }
        x
    }
}

/// One concrete draw of every hidden variable plus the chain RNG.
#[derive(Debug, Clone)]
pub struct GibbsState {
    pub x: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub alpha: DMatrix<f64>,
    pub gamma: f64,
    pub rng: ChaCha8Rng,
}

/// N distinct training columns, scaled to unit norm. Columns are recycled with a
/// small Gaussian perturbation when there are fewer signals than atoms.
pub fn initial_dictionary(data: &TrainingSet, num_atoms: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(INIT_STREAM);
    let (m, l) = (data.dim(), data.len());
    let take = num_atoms.min(l);
    let picks = index::sample(&mut rng, l, take).into_vec();
    let mut dict = DMatrix::zeros(m, num_atoms);
    for k in 0..num_atoms {
        dict.set_column(k, &data.y().column(picks[k % take]));
    }
    let zero = normalize_columns(&mut dict);
    for j in zero {
        for i in 0..m {
            dict[(i, j)] = StandardNormal.sample(&mut rng);
        }
    }
    if num_atoms > take {
        for j in take..num_atoms {
            for i in 0..m {
                let z: f64 = StandardNormal.sample(&mut rng);
                dict[(i, j)] += RECYCLE_JITTER * z;
            }
        }
    }
    normalize_columns(&mut dict);
    dict
}

/// Starting point of the variational engine. Callers validate `cfg` first.
pub fn initialize_vb_state(cfg: &ModelConfig, data: &TrainingSet) -> VbState {
    let (m, n, l) = (data.dim(), cfg.num_atoms, data.len());
    let energy = data.y().norm_squared();
    VbState {
        code_means: vec![DVector::zeros(n); l],
        code_covs: vec![DMatrix::identity(n, n); l],
        dict_mean: initial_dictionary(data, n, cfg.seed),
        dict_row_cov: DMatrix::identity(n, n) * 1e-6,
        alpha_shape: cfg.a + 0.5,
        alpha_rates: DMatrix::from_element(n, l, cfg.b + 0.5),
        gamma_shape: (m * l) as f64 / 2.0 + cfg.c,
        gamma_rate: cfg.d + 0.5 * energy / l as f64,
    }
}

/// Starting point of the Gibbs chain. Callers validate `cfg` first.
pub fn initialize_gibbs_state(cfg: &ModelConfig, data: &TrainingSet) -> GibbsState {
    let (n, l) = (cfg.num_atoms, data.len());
    let count = data.y().len() as f64;
    let mean = data.y().sum() / count;
    let var = data.y().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / count;
    let gamma = if var > 0.0 && (1.0 / var).is_finite() {
        1.0 / var
    } else {
        1.0
    };
    GibbsState {
        x: DMatrix::zeros(n, l),
        d: initial_dictionary(data, n, cfg.seed),
        alpha: DMatrix::from_element(n, l, 1.0),
        gamma,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
    }
}
