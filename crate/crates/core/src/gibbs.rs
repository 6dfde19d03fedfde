//! Blocked Gibbs sampler over codes, atoms, coefficient precisions and noise precision.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{prior_precision, spd_cholesky};
use crate::model::{
    initialize_gibbs_state, validate_config, DictEstimate, GibbsState, ModelConfig, TrainingSet,
};

/// Strategy for drawing `x_l ~ N(mu_l, (gamma D^T D + Lambda_l)^-1)`.
///
/// Both routes are exact; they differ only in cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CodeSampler {
    /// `LowRank` when the dictionary is overcomplete (`N > M`), `Precision` otherwise.
    #[default]
    Auto,
    /// Factor the `N x N` precision `P = R^T R`, solve for the mean, add `R^-1 z`.
    Precision,
    /// Work with the `M x M` system `gamma D Lambda^-1 D^T + I` instead
    /// (perturb-then-correct sampler for Gaussian posteriors of linear models).
    LowRank,
}

fn standard_normals<R: Rng>(rng: &mut R, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| StandardNormal.sample(rng))
}

fn check_dims(state: &GibbsState, data: &TrainingSet) -> Result<()> {
    let (m, n) = state.d.shape();
    if m != data.dim()
        || state.x.shape() != (n, data.len())
        || state.alpha.shape() != (n, data.len())
    {
        return Err(Error::DimensionMismatch(format!(
            "chain has D {}x{}, X {}x{}, data is {}x{}",
            m,
            n,
            state.x.nrows(),
            state.x.ncols(),
            data.dim(),
            data.len()
        )));
    }
    Ok(())
}

/// Draws every code column from its Gaussian conditional.
pub fn sample_codes(state: &mut GibbsState, data: &TrainingSet) -> Result<()> {
    sample_codes_with(state, data, CodeSampler::Auto)
}

pub fn sample_codes_with(
    state: &mut GibbsState,
    data: &TrainingSet,
    sampler: CodeSampler,
) -> Result<()> {
    check_dims(state, data)?;
    let (m, n) = state.d.shape();
    let route = match sampler {
        CodeSampler::Auto if n > m => CodeSampler::LowRank,
        CodeSampler::Auto => CodeSampler::Precision,
        other => other,
    };
    match route {
        CodeSampler::LowRank => sample_codes_low_rank(state, data),
        _ => sample_codes_precision(state, data),
    }
}

fn sample_codes_precision(state: &mut GibbsState, data: &TrainingSet) -> Result<()> {
    let gamma = state.gamma;
    let gram = state.d.tr_mul(&state.d) * gamma;
    let rhs = state.d.tr_mul(data.y()) * gamma;
    let n = gram.nrows();
    for l in 0..data.len() {
        let mut prec = gram.clone();
        for i in 0..n {
            prec[(i, i)] += state.alpha[(i, l)];
        }
        let chol = spd_cholesky(prec, "code conditional")?;
        let mean = chol.solve(&rhs.column(l).into_owned());
        let z = standard_normals(&mut state.rng, n);
        let noise = chol
            .l_dirty()
            .tr_solve_lower_triangular(&z)
            .ok_or(Error::SingularPrecision("code conditional"))?;
        state.x.set_column(l, &(mean + noise));
    }
    Ok(())
}

fn sample_codes_low_rank(state: &mut GibbsState, data: &TrainingSet) -> Result<()> {
    let (m, n) = state.d.shape();
    let root_gamma = state.gamma.sqrt();
    let phi = &state.d * root_gamma;
    let mut scaled = phi.clone();
    for l in 0..data.len() {
        let prior_var = state.alpha.column(l).map(|a| 1.0 / a);
        // u ~ N(0, Lambda^-1), delta ~ N(0, I)
        let u = standard_normals(&mut state.rng, n).component_mul(&prior_var.map(f64::sqrt));
        let delta = standard_normals(&mut state.rng, m);
        let v = &phi * &u + delta;
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col.copy_from(&phi.column(j));
            col *= prior_var[j].sqrt();
        }
        let mut system = &scaled * scaled.transpose();
        for i in 0..m {
            system[(i, i)] += 1.0;
        }
        let chol = spd_cholesky(system, "code conditional")?;
        let w = chol.solve(&(data.y().column(l) * root_gamma - v));
        let x = u + phi.tr_mul(&w).component_mul(&prior_var);
        state.x.set_column(l, &x);
    }
    Ok(())
}

/// Samples the atoms in index order, each conditioned on the latest values of
/// the others, and returns the running residual `Y - D X`.
///
/// The residual is kept current with a rank-one correction after every atom.
pub fn sample_atoms(state: &mut GibbsState, data: &TrainingSet, beta: f64) -> Result<DMatrix<f64>> {
    check_dims(state, data)?;
    let (m, n) = state.d.shape();
    let gamma = state.gamma;
    let ridge = prior_precision(beta);
    let mut residual = data.y() - &state.d * &state.x;
    for k in 0..n {
        let row: DVector<f64> = state.x.row(k).transpose();
        let row_sq = row.norm_squared();
        let denom = gamma * row_sq + ridge;
        if !(denom > 0.0 && denom.is_finite()) {
            return Err(Error::SingularPrecision("atom conditional"));
        }
        let var = 1.0 / denom;
        let old = state.d.column(k).into_owned();
        // Y^-k x_k^T = R x_k^T + d_k |x_k|^2
        let proj = &residual * &row + &old * row_sq;
        let new = proj * (gamma * var) + standard_normals(&mut state.rng, m) * var.sqrt();
        residual.ger(-1.0, &(&new - &old), &row, 1.0);
        state.d.set_column(k, &new);
    }
    Ok(residual)
}

/// `alpha_nl ~ Gamma(a + 1/2, b + x_nl^2 / 2)`.
pub fn sample_alpha(state: &mut GibbsState, cfg: &ModelConfig) -> Result<()> {
    let shape = cfg.a + 0.5;
    for (alpha, x) in state.alpha.iter_mut().zip(state.x.iter()) {
        let rate = cfg.b + 0.5 * x * x;
        let draw = Gamma::new(shape, 1.0 / rate)
            .map_err(|e| Error::NonFinite(format!("alpha conditional: {e}")))?
            .sample(&mut state.rng);
        // a draw can underflow to exactly zero only for absurd rates
        *alpha = draw.max(f64::MIN_POSITIVE);
    }
    Ok(())
}

/// `gamma ~ Gamma(c + ML/2, d + |Y - DX|_F^2 / 2)`.
pub fn sample_gamma(state: &mut GibbsState, data: &TrainingSet, cfg: &ModelConfig) -> Result<()> {
    check_dims(state, data)?;
    let resid_sq = (data.y() - &state.d * &state.x).norm_squared();
    draw_gamma(state, data, cfg, resid_sq)
}

fn draw_gamma(
    state: &mut GibbsState,
    data: &TrainingSet,
    cfg: &ModelConfig,
    resid_sq: f64,
) -> Result<()> {
    let shape = cfg.c + (data.dim() * data.len()) as f64 / 2.0;
    let rate = cfg.d + 0.5 * resid_sq;
    let draw = Gamma::new(shape, 1.0 / rate)
        .map_err(|e| Error::NonFinite(format!("gamma conditional: {e}")))?
        .sample(&mut state.rng);
    if !(draw > 0.0 && draw.is_finite()) {
        return Err(Error::NonFinite(format!("noise precision draw {draw}")));
    }
    state.gamma = draw;
    Ok(())
}

/// Samples recorded by [`run_gibbs`].
#[derive(Debug, Clone, Default)]
pub struct ChainTrace {
    /// Dictionaries kept after burn-in (every `thinning`-th).
    pub kept_dicts: Vec<DMatrix<f64>>,
    /// `|Y - D X|_F` after each iteration.
    pub residual_per_iter: Vec<f64>,
    pub gamma_per_iter: Vec<f64>,
}

/// One full Gibbs iteration; returns `|Y - DX|_F^2` for the new sample.
pub fn gibbs_iteration(
    state: &mut GibbsState,
    data: &TrainingSet,
    cfg: &ModelConfig,
    sampler: CodeSampler,
) -> Result<f64> {
    sample_codes_with(state, data, sampler)?;
    let residual = sample_atoms(state, data, cfg.beta)?;
    sample_alpha(state, cfg)?;
    // alpha does not enter the residual, so the atom sweep's residual is current
    let resid_sq = residual.norm_squared();
    draw_gamma(state, data, cfg, resid_sq)?;
    Ok(resid_sq)
}

pub fn run_gibbs(cfg: &ModelConfig, data: &TrainingSet) -> Result<(ChainTrace, GibbsState)> {
    run_gibbs_observed(cfg, data, CodeSampler::Auto, |_, _| {})
}

/// [`run_gibbs`] with an explicit code sampler and a callback after every iteration.
pub fn run_gibbs_observed<F>(
    cfg: &ModelConfig,
    data: &TrainingSet,
    sampler: CodeSampler,
    mut observe: F,
) -> Result<(ChainTrace, GibbsState)>
where
    F: FnMut(usize, &GibbsState),
{
    validate_config(cfg, data)?;
    let mut state = initialize_gibbs_state(cfg, data);
    let mut trace = ChainTrace::default();
    for iter in 0..cfg.max_iters {
        let resid_sq = gibbs_iteration(&mut state, data, cfg, sampler)?;
        trace.residual_per_iter.push(resid_sq.sqrt());
        trace.gamma_per_iter.push(state.gamma);
        if iter >= cfg.burn_in && (iter - cfg.burn_in).is_multiple_of(cfg.thinning) {
            trace.kept_dicts.push(state.d.clone());
        }
        observe(iter, &state);
    }
    Ok((trace, state))
}

/// Dictionary point estimate from the kept samples.
pub fn estimate_dictionary(trace: &ChainTrace, mode: DictEstimate) -> Result<DMatrix<f64>> {
    let last = trace.kept_dicts.last().ok_or(Error::EmptyTrace)?;
    match mode {
        DictEstimate::LastSample => Ok(last.clone()),
        DictEstimate::AverageTail(k) => {
            let len = trace.kept_dicts.len();
            if k == 0 || k > len {
                return Err(Error::TailLargerThanTrace { tail: k, len });
            }
            let tail = &trace.kept_dicts[len - k..];
            let sum = tail
                .iter()
                .fold(DMatrix::zeros(last.nrows(), last.ncols()), |acc, d| acc + d);
            Ok(sum / k as f64)
        }
    }
}
