//! Mean-field variational inference.
//!
//! One sweep updates `q(X)`, `q(D)`, `q(alpha)` and `q(gamma)` in that order; each
//! update is the closed-form maximizer of the evidence lower bound with the other
//! factors held at their most recent values.

use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};
use crate::linalg::{chol_logdet, prior_precision, spd_cholesky, symmetrize, trace_of_product};
use crate::model::{initialize_vb_state, validate_config, ModelConfig, TrainingSet, VbState};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// How `q(D)` is refreshed within a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DictUpdate {
    /// All atoms jointly; rows share one `N x N` covariance.
    Full,
    /// One atom at a time in index order with isotropic per-atom covariance.
    Atomwise,
}

/// Posterior expectations consumed by the updates.
#[derive(Debug, Clone)]
pub struct VbMoments {
    /// `<X>`, `N x L`.
    pub x_mean: DMatrix<f64>,
    /// `<X X^T> = <X><X>^T + sum_l Sigma_l`.
    pub x_outer: DMatrix<f64>,
    /// `<x_nl^2> = mu_l[n]^2 + Sigma_l[n, n]`.
    pub x_sq: DMatrix<f64>,
    pub d_mean: DMatrix<f64>,
    /// `<D^T D> = <D>^T <D> + M A`.
    pub dtd: DMatrix<f64>,
    pub gamma_mean: f64,
    pub alpha_mean: DMatrix<f64>,
}

impl VbMoments {
    pub fn from_state(state: &VbState) -> Self {
        let x_mean = state.code_mean_matrix();
        let x_outer = &x_mean * x_mean.transpose() + code_cov_sum(state);
        Self {
            x_sq: code_second_moments(state),
            x_outer,
            x_mean,
            d_mean: state.dict_mean.clone(),
            dtd: expected_dtd(state),
            gamma_mean: state.gamma_mean(),
            alpha_mean: state.alpha_mean(),
        }
    }
}

/// `sum_l Sigma_l`.
pub fn code_cov_sum(state: &VbState) -> DMatrix<f64> {
    let n = state.num_atoms();
    state
        .code_covs
        .iter()
        .fold(DMatrix::zeros(n, n), |acc, s| acc + s)
}

pub fn code_second_moments(state: &VbState) -> DMatrix<f64> {
    let n = state.num_atoms();
    DMatrix::from_fn(n, state.num_signals(), |i, l| {
        state.code_means[l][i].powi(2) + state.code_covs[l][(i, i)]
    })
}

pub fn expected_dtd(state: &VbState) -> DMatrix<f64> {
    let m = state.dict_mean.nrows() as f64;
    state.dict_mean.tr_mul(&state.dict_mean) + &state.dict_row_cov * m
}

fn check_dims(state: &VbState, data: &TrainingSet) -> Result<()> {
    if state.dict_mean.nrows() != data.dim() || state.num_signals() != data.len() {
        return Err(Error::DimensionMismatch(format!(
            "state is {}x{} over {} signals, data is {}x{}",
            state.dict_mean.nrows(),
            state.num_atoms(),
            state.num_signals(),
            data.dim(),
            data.len()
        )));
    }
    Ok(())
}

/// Refreshes every code posterior `q(x_l) = N(mu_l, Sigma_l)` with
/// `Sigma_l = (<gamma><D^T D> + diag(<alpha_l>))^-1` and `mu_l = <gamma> Sigma_l <D>^T y_l`.
pub fn update_codes(state: &mut VbState, data: &TrainingSet) -> Result<()> {
    check_dims(state, data)?;
    let gamma = state.gamma_mean();
    let gram = expected_dtd(state) * gamma;
    let rhs = state.dict_mean.tr_mul(data.y()) * gamma;
    let alpha = state.alpha_mean();
    for l in 0..data.len() {
        let mut prec = gram.clone();
        for n in 0..prec.nrows() {
            prec[(n, n)] += alpha[(n, l)];
        }
        let chol = spd_cholesky(prec, "code posterior")?;
        state.code_means[l] = chol.solve(&rhs.column(l).into_owned());
        let mut cov = chol.inverse();
        symmetrize(&mut cov);
        state.code_covs[l] = cov;
    }
    Ok(())
}

/// Joint dictionary update: `A = (<gamma><X X^T> + beta^-1 I)^-1`, `<D> = <gamma> Y <X>^T A`.
pub fn update_dictionary_full(state: &mut VbState, data: &TrainingSet, beta: f64) -> Result<()> {
    check_dims(state, data)?;
    let gamma = state.gamma_mean();
    let x = state.code_mean_matrix();
    let mut prec = (&x * x.transpose() + code_cov_sum(state)) * gamma;
    let ridge = prior_precision(beta);
    for n in 0..prec.nrows() {
        prec[(n, n)] += ridge;
    }
    symmetrize(&mut prec);
    let chol = spd_cholesky(prec, "dictionary posterior")?;
    // A is symmetric, so <D>^T = A B^T.
    let bt = (data.y() * x.transpose()).transpose() * gamma;
    state.dict_mean = chol.solve(&bt).transpose();
    let mut a = chol.inverse();
    symmetrize(&mut a);
    state.dict_row_cov = a;
    Ok(())
}

/// Sequential atom update. Atom `n` sees `<Y^-n> = Y - <D^-n><X>` built from the
/// latest means of all other atoms, and gets
/// `sigma_n^2 = (<gamma><x_n. x_n.^T> + beta^-1)^-1`,
/// `mu_n = <gamma> sigma_n^2 <Y^-n> <x_n.>^T`.
///
/// Returns the per-atom variances; `dict_row_cov` becomes `diag(sigma^2)`.
pub fn update_dictionary_atomwise(
    state: &mut VbState,
    data: &TrainingSet,
    beta: f64,
) -> Result<Vec<f64>> {
    check_dims(state, data)?;
    let gamma = state.gamma_mean();
    let n_atoms = state.num_atoms();
    let x = state.code_mean_matrix();
    let ridge = prior_precision(beta);
    let mut residual = data.y() - &state.dict_mean * &x;
    let mut vars = Vec::with_capacity(n_atoms);
    for n in 0..n_atoms {
        let row = x.row(n);
        let row_sq = row.norm_squared();
        let second = row_sq + state.code_covs.iter().map(|s| s[(n, n)]).sum::<f64>();
        let denom = gamma * second + ridge;
        if !(denom > 0.0 && denom.is_finite()) {
            return Err(Error::SingularPrecision("atom posterior"));
        }
        let var = 1.0 / denom;
        let old = state.dict_mean.column(n).into_owned();
        // <Y^-n> <x_n.>^T = R x_n^T + d_n |x_n|^2
        let proj = &residual * row.transpose() + &old * row_sq;
        let new = proj * (gamma * var);
        residual -= (&new - &old) * row;
        state.dict_mean.set_column(n, &new);
        vars.push(var);
    }
    state.dict_row_cov = DMatrix::from_diagonal(&DVector::from_column_slice(&vars));
    Ok(vars)
}

/// `a~ = a + 1/2`, `b~_nl = b + <x_nl^2> / 2`.
pub fn update_alpha(state: &mut VbState, cfg: &ModelConfig) {
    state.alpha_shape = cfg.a + 0.5;
    state.alpha_rates = code_second_moments(state).map(|s| cfg.b + 0.5 * s);
}

/// `<|Y - D X|_F^2>` under the current factors.
///
/// Evaluates `|Y - <D><X>|^2 + tr(<D^T D><X X^T>) - tr(<D>^T<D><X><X>^T)` with the
/// difference of traces expanded as `tr(<D>^T<D> S) + M tr(A (<X><X>^T + S))`,
/// `S = sum_l Sigma_l`, so no large terms cancel.
pub fn expected_residual(state: &VbState, data: &TrainingSet) -> Result<f64> {
    check_dims(state, data)?;
    let m = data.dim() as f64;
    let x = state.code_mean_matrix();
    let fit = (data.y() - &state.dict_mean * &x).norm_squared();
    let s = code_cov_sum(state);
    let g = state.dict_mean.tr_mul(&state.dict_mean);
    let xxt = &x * x.transpose() + &s;
    let spread = trace_of_product(&g, &s) + m * trace_of_product(&state.dict_row_cov, &xxt);
    let total = fit + spread;
    if total < -1e-8 * data.y().norm_squared() {
        return Err(Error::NegativeResidual(total));
    }
    Ok(total.max(0.0))
}

/// `c~ = ML/2 + c`, `d~ = d + <|Y - DX|^2> / 2`.
pub fn update_gamma(state: &mut VbState, data: &TrainingSet, cfg: &ModelConfig) -> Result<()> {
    let resid = expected_residual(state, data)?;
    state.gamma_shape = (data.dim() * data.len()) as f64 / 2.0 + cfg.c;
    state.gamma_rate = cfg.d + 0.5 * resid;
    Ok(())
}

/// Entropy of `Gamma(shape, rate)`.
fn gamma_entropy(shape: f64, rate: f64) -> f64 {
    shape - rate.ln() + ln_gamma(shape) + (1.0 - shape) * digamma(shape)
}

/// Evidence lower bound `E_q[ln p(Y, X, D, alpha, gamma)] - E_q[ln q]`.
///
/// With `beta = inf` the improper flat atom prior contributes nothing.
pub fn compute_elbo(state: &VbState, data: &TrainingSet, cfg: &ModelConfig) -> Result<f64> {
    check_dims(state, data)?;
    let (m, n, l) = (data.dim(), state.num_atoms(), data.len());
    let (mf, nf, lf) = (m as f64, n as f64, l as f64);

    let e_gamma = state.gamma_mean();
    let e_ln_gamma = digamma(state.gamma_shape) - state.gamma_rate.ln();
    let resid = expected_residual(state, data)?;
    let likelihood = 0.5 * mf * lf * (e_ln_gamma - LN_2PI) - 0.5 * e_gamma * resid;

    let x_sq = code_second_moments(state);
    let shape = state.alpha_shape;
    let psi_shape = digamma(shape);
    let lg_shape = ln_gamma(shape);
    let prior_norm = cfg.a * cfg.b.ln() - ln_gamma(cfg.a);
    let mut alpha_terms = 0.0;
    for (rate, sq) in state.alpha_rates.iter().zip(x_sq.iter()) {
        let e_alpha = shape / rate;
        let e_ln_alpha = psi_shape - rate.ln();
        // E ln p(x | alpha) + E ln p(alpha) + H[q(alpha)]
        alpha_terms += 0.5 * (e_ln_alpha - LN_2PI) - 0.5 * e_alpha * sq;
        alpha_terms += prior_norm + (cfg.a - 1.0) * e_ln_alpha - cfg.b * e_alpha;
        alpha_terms += shape - rate.ln() + lg_shape + (1.0 - shape) * psi_shape;
    }

    let dict_prior = if cfg.beta.is_finite() {
        let second = state.dict_mean.norm_squared() + mf * state.dict_row_cov.trace();
        -0.5 * mf * nf * (LN_2PI + cfg.beta.ln()) - 0.5 * second / cfg.beta
    } else {
        0.0
    };

    let gamma_prior =
        cfg.c * cfg.d.ln() - ln_gamma(cfg.c) + (cfg.c - 1.0) * e_ln_gamma - cfg.d * e_gamma;

    let mut code_entropy = 0.0;
    for cov in &state.code_covs {
        let chol = nalgebra::Cholesky::new(cov.clone())
            .ok_or_else(|| Error::NonFinite("code covariance is not positive definite".into()))?;
        code_entropy += 0.5 * nf * (1.0 + LN_2PI) + 0.5 * chol_logdet(&chol);
    }
    let dict_chol = nalgebra::Cholesky::new(state.dict_row_cov.clone())
        .ok_or_else(|| Error::NonFinite("dictionary covariance is not positive definite".into()))?;
    let dict_entropy = mf * (0.5 * nf * (1.0 + LN_2PI) + 0.5 * chol_logdet(&dict_chol));

    let elbo = likelihood
        + alpha_terms
        + dict_prior
        + gamma_prior
        + code_entropy
        + dict_entropy
        + gamma_entropy(state.gamma_shape, state.gamma_rate);
    if !elbo.is_finite() {
        return Err(Error::NonFinite(format!(
            "elbo terms: likelihood {likelihood}, alpha {alpha_terms}, dict prior {dict_prior}, \
             code entropy {code_entropy}, dict entropy {dict_entropy}"
        )));
    }
    Ok(elbo)
}

/// One complete coordinate-ascent sweep in the order codes, dictionary, alpha, gamma.
pub fn sweep(
    state: &mut VbState,
    data: &TrainingSet,
    cfg: &ModelConfig,
    variant: DictUpdate,
) -> Result<()> {
    update_codes(state, data)?;
    match variant {
        DictUpdate::Full => update_dictionary_full(state, data, cfg.beta)?,
        DictUpdate::Atomwise => {
            update_dictionary_atomwise(state, data, cfg.beta)?;
        }
    }
    update_alpha(state, cfg);
    update_gamma(state, data, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VbSweep {
    pub iteration: usize,
    pub elbo: f64,
    /// `|D_new - D_old|_F / |D_old|_F` for the dictionary mean.
    pub dict_change: f64,
}

#[derive(Debug, Clone)]
pub struct VbRun {
    pub state: VbState,
    pub trace: Vec<VbSweep>,
    /// True when the dictionary change fell below `tol` before `max_iters`.
    pub converged: bool,
}

impl VbRun {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }

    pub fn max_iters_reached(&self) -> bool {
        !self.converged
    }
}

/// Runs sweeps until the relative dictionary change drops below `cfg.tol` or
/// `cfg.max_iters` sweeps have been made.
pub fn run_vb(cfg: &ModelConfig, data: &TrainingSet, variant: DictUpdate) -> Result<VbRun> {
    validate_config(cfg, data)?;
    let mut state = initialize_vb_state(cfg, data);
    let mut trace = Vec::new();
    let mut converged = false;
    for iteration in 1..=cfg.max_iters {
        let before = state.dict_mean.clone();
        sweep(&mut state, data, cfg, variant)?;
        let scale = before.norm();
        let dict_change = if scale > 0.0 {
            (&state.dict_mean - &before).norm() / scale
        } else {
            f64::INFINITY
        };
        let elbo = compute_elbo(&state, data, cfg)?;
        trace.push(VbSweep {
            iteration,
            elbo,
            dict_change,
        });
        if dict_change < cfg.tol {
            converged = true;
            break;
        }
    }
    Ok(VbRun {
        state,
        trace,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
    }

    fn random_spd(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let g = gaussian(n, n, rng);
        (&g * g.transpose() + DMatrix::identity(n, n)) * scale
    }

    /// Small state with every factor away from its initial value.
    fn random_state(m: usize, n: usize, l: usize, seed: u64) -> (VbState, TrainingSet) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = TrainingSet::new(gaussian(m, l, &mut rng)).unwrap();
        let state = VbState {
            code_means: (0..l)
                .map(|_| gaussian(n, 1, &mut rng).column(0).into())
                .collect(),
            code_covs: (0..l).map(|_| random_spd(n, 0.05, &mut rng)).collect(),
            dict_mean: gaussian(m, n, &mut rng),
            dict_row_cov: random_spd(n, 0.01, &mut rng),
            alpha_shape: 1.0,
            alpha_rates: DMatrix::from_fn(n, l, |_, _| 0.5 + rand::Rng::random::<f64>(&mut rng)),
            gamma_shape: 3.0,
            gamma_rate: 1.5,
        };
        (state, data)
    }

    fn max_rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).amax() / b.amax().max(1e-300)
    }

    #[test]
    fn scalar_code_update() {
        let data = TrainingSet::new(DMatrix::from_element(1, 1, 2.0)).unwrap();
        let mut st = VbState {
            code_means: vec![DVector::zeros(1)],
            code_covs: vec![DMatrix::identity(1, 1)],
            dict_mean: DMatrix::from_element(1, 1, 1.0),
            dict_row_cov: DMatrix::zeros(1, 1),
            alpha_shape: 1.0,
            alpha_rates: DMatrix::from_element(1, 1, 1.0),
            gamma_shape: 2.0,
            gamma_rate: 2.0,
        };
        update_codes(&mut st, &data).unwrap();
        assert!((st.code_covs[0][(0, 0)] - 0.5).abs() < 1e-15);
        assert!((st.code_means[0][0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn vanishing_noise_precision_returns_prior() {
        let (mut st, data) = random_state(3, 4, 2, 11);
        st.gamma_shape = 1e-30;
        st.gamma_rate = 1.0;
        update_codes(&mut st, &data).unwrap();
        let alpha = st.alpha_mean();
        for l in 0..2 {
            for i in 0..4 {
                for j in 0..4 {
                    let expect = if i == j { 1.0 / alpha[(i, l)] } else { 0.0 };
                    assert!((st.code_covs[l][(i, j)] - expect).abs() < 1e-12);
                }
            }
            assert!(st.code_means[l].amax() < 1e-12);
        }
    }

    #[test]
    fn code_update_matches_dense_inverse() {
        let (mut st, data) = random_state(3, 4, 2, 5);
        let gamma = st.gamma_mean();
        let dtd = st.dict_mean.transpose() * &st.dict_mean
            + &st.dict_row_cov * st.dict_mean.nrows() as f64;
        let alpha = st.alpha_mean();
        let mut expected = Vec::new();
        for l in 0..2 {
            let prec = &dtd * gamma + DMatrix::from_diagonal(&alpha.column(l).into_owned());
            let cov = prec.try_inverse().unwrap();
            let mean = &cov * st.dict_mean.transpose() * data.y().column(l) * gamma;
            expected.push((cov, mean));
        }
        update_codes(&mut st, &data).unwrap();
        for (l, (cov, mean)) in expected.iter().enumerate() {
            assert!(max_rel(&st.code_covs[l], cov) < 1e-10);
            let got = DMatrix::from_column_slice(4, 1, st.code_means[l].as_slice());
            let want = DMatrix::from_column_slice(4, 1, mean.as_slice());
            assert!(max_rel(&got, &want) < 1e-10);
            let asym = (&st.code_covs[l] - st.code_covs[l].transpose()).amax();
            assert!(asym < 1e-12);
        }
    }

    #[test]
    fn code_update_commutes_with_column_permutation() {
        let (mut st, data) = random_state(3, 5, 4, 21);
        let perm = [2usize, 0, 3, 1];
        let mut pst = st.clone();
        let py = DMatrix::from_fn(3, 4, |i, j| data.y()[(i, perm[j])]);
        pst.alpha_rates = DMatrix::from_fn(5, 4, |i, j| st.alpha_rates[(i, perm[j])]);
        let pdata = TrainingSet::new(py).unwrap();
        update_codes(&mut st, &data).unwrap();
        update_codes(&mut pst, &pdata).unwrap();
        for (j, &src) in perm.iter().enumerate() {
            assert_eq!(pst.code_means[j], st.code_means[src]);
            assert_eq!(pst.code_covs[j], st.code_covs[src]);
        }
    }

    #[test]
    fn flat_prior_identity_codes_recover_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let y = gaussian(3, 4, &mut rng);
        let data = TrainingSet::new(y.clone()).unwrap();
        let (mut st, _) = random_state(3, 4, 4, 2);
        for l in 0..4 {
            st.code_means[l] = DVector::from_fn(4, |i, _| if i == l { 1.0 } else { 0.0 });
            st.code_covs[l] = DMatrix::zeros(4, 4);
        }
        st.gamma_shape = 1.0;
        st.gamma_rate = 1.0;
        update_dictionary_full(&mut st, &data, 1e30).unwrap();
        assert!((&st.dict_mean - &y).amax() < 1e-10);
    }

    #[test]
    fn full_dictionary_update_matches_rowwise_normal_equations() {
        let (mut st, data) = random_state(4, 3, 6, 17);
        let beta = 2.0;
        let gamma = st.gamma_mean();
        let x = st.code_mean_matrix();
        let xxt = &x * x.transpose() + code_cov_sum(&st);
        // each row maximizes  -1/2 d (gamma XX^T + I/beta) d^T + gamma y_m <X>^T d^T
        let h = &xxt * gamma + DMatrix::identity(3, 3) / beta;
        let h_inv = h.clone().try_inverse().unwrap();
        let mut oracle = DMatrix::zeros(4, 3);
        for m in 0..4 {
            let g = (data.y().row(m) * x.transpose()) * gamma;
            let row = h.clone().lu().solve(&g.transpose()).unwrap();
            oracle.set_row(m, &row.transpose());
        }
        update_dictionary_full(&mut st, &data, beta).unwrap();
        assert!(max_rel(&st.dict_mean, &oracle) < 1e-10);
        assert!(max_rel(&st.dict_row_cov, &h_inv) < 1e-10);
    }

    #[test]
    fn single_atom_atomwise_equals_full() {
        let (st, data) = random_state(5, 1, 7, 3);
        let mut full = st.clone();
        let mut seq = st;
        update_dictionary_full(&mut full, &data, 1e8).unwrap();
        let vars = update_dictionary_atomwise(&mut seq, &data, 1e8).unwrap();
        assert!(max_rel(&seq.dict_mean, &full.dict_mean) < 1e-12);
        assert!((vars[0] - full.dict_row_cov[(0, 0)]).abs() < 1e-12 * vars[0]);
    }

    #[test]
    fn unused_atom_falls_back_to_prior() {
        let (mut st, data) = random_state(3, 2, 4, 9);
        for l in 0..4 {
            st.code_means[l][1] = 0.0;
            for k in 0..2 {
                st.code_covs[l][(1, k)] = 0.0;
                st.code_covs[l][(k, 1)] = 0.0;
            }
        }
        let vars = update_dictionary_atomwise(&mut st, &data, 1.0).unwrap();
        assert_eq!(vars[1], 1.0);
        assert!(st.dict_mean.column(1).iter().all(|&v| v == 0.0));
        assert_eq!(st.dict_row_cov[(1, 1)], 1.0);
        assert_eq!(st.dict_row_cov[(0, 1)], 0.0);
    }

    #[test]
    fn atomwise_sweep_does_not_increase_fit_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let truth = gaussian(6, 2, &mut rng);
        let x = gaussian(2, 40, &mut rng);
        let y = &truth * &x + gaussian(6, 40, &mut rng) * 0.05;
        let data = TrainingSet::new(y).unwrap();
        let (mut st, _) = random_state(6, 2, 40, 4);
        for l in 0..40 {
            st.code_means[l] = x.column(l).into_owned();
            st.code_covs[l] = DMatrix::identity(2, 2) * 1e-4;
        }
        st.gamma_shape = 400.0;
        st.gamma_rate = 1.0;
        let before = (data.y() - &st.dict_mean * &x).norm();
        update_dictionary_atomwise(&mut st, &data, 1e8).unwrap();
        let after = (data.y() - &st.dict_mean * &x).norm();
        assert!(after <= before, "{after} > {before}");
    }

    #[test]
    fn infinite_beta_with_unused_atom_is_singular() {
        let (mut st, data) = random_state(3, 2, 2, 1);
        for l in 0..2 {
            st.code_means[l][0] = 0.0;
            st.code_covs[l] = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0]));
        }
        assert!(matches!(
            update_dictionary_atomwise(&mut st, &data, f64::INFINITY),
            Err(Error::SingularPrecision(_))
        ));
    }

    #[test]
    fn alpha_update_arithmetic() {
        let (mut st, _) = random_state(2, 2, 1, 1);
        let cfg = ModelConfig::vb_defaults(2);
        st.code_means[0] = DVector::from_vec(vec![0.0, 1.0]);
        st.code_covs[0] = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0]));
        update_alpha(&mut st, &cfg);
        assert_eq!(st.alpha_shape, 1.0);
        assert_eq!(st.alpha_rates[(0, 0)], 1e-6);
        assert!((st.alpha_mean()[(0, 0)] - 1e6).abs() < 1e-6);
        assert!((st.alpha_rates[(1, 0)] - 1.000001).abs() < 1e-15);
        assert!((st.alpha_mean()[(1, 0)] - 1.0 / 1.000001).abs() < 1e-15);
        assert!(st.alpha_rates.iter().all(|&r| r >= cfg.b));
    }

    #[test]
    fn gamma_update_exact_fit() {
        let d = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        let x = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 2.0, -1.0, 3.0, 1.0]);
        let data = TrainingSet::new(&d * &x).unwrap();
        let mut st = VbState {
            code_means: (0..3).map(|l| x.column(l).into_owned()).collect(),
            code_covs: vec![DMatrix::zeros(2, 2); 3],
            dict_mean: d,
            dict_row_cov: DMatrix::zeros(2, 2),
            alpha_shape: 1.0,
            alpha_rates: DMatrix::from_element(2, 3, 1.0),
            gamma_shape: 1.0,
            gamma_rate: 1.0,
        };
        let cfg = ModelConfig::vb_defaults(2);
        update_gamma(&mut st, &data, &cfg).unwrap();
        assert_eq!(st.gamma_rate, cfg.d);
        assert_eq!(st.gamma_shape, 3.0 + 0.5);
    }

    #[test]
    fn gamma_shape_for_benchmark_dimensions() {
        let data = TrainingSet::new(DMatrix::from_element(20, 1000, 0.1)).unwrap();
        let cfg = ModelConfig::vb_defaults(50);
        let mut st = initialize_vb_state(&cfg, &data);
        update_gamma(&mut st, &data, &cfg).unwrap();
        assert_eq!(st.gamma_shape, 10000.5);
    }

    #[test]
    fn stable_residual_matches_literal_trace_expansion() {
        let (st, data) = random_state(4, 3, 5, 23);
        let mm = VbMoments::from_state(&st);
        let literal = (data.y() - &mm.d_mean * &mm.x_mean).norm_squared()
            + (&mm.dtd * &mm.x_outer).trace()
            - (mm.d_mean.transpose() * &mm.d_mean * &mm.x_mean * mm.x_mean.transpose()).trace();
        let stable = expected_residual(&st, &data).unwrap();
        assert!((literal - stable).abs() < 1e-10 * stable);
    }

    #[test]
    fn moment_identities() {
        let (st, _) = random_state(4, 3, 5, 29);
        let mm = VbMoments::from_state(&st);
        let mut outer = &mm.x_mean * mm.x_mean.transpose();
        for s in &st.code_covs {
            outer += s;
        }
        assert!(max_rel(&mm.x_outer, &outer) < 1e-10);
        let dtd = mm.d_mean.transpose() * &mm.d_mean + &st.dict_row_cov * 4.0;
        assert!(max_rel(&mm.dtd, &dtd) < 1e-10);
        for l in 0..5 {
            for n in 0..3 {
                assert!(mm.x_sq[(n, l)] >= mm.x_mean[(n, l)].powi(2));
            }
        }
        assert_eq!(mm.gamma_mean, 2.0);
    }

    #[test]
    fn negative_residual_is_reported() {
        let (mut st, data) = random_state(2, 2, 2, 3);
        st.dict_row_cov = -DMatrix::identity(2, 2) * 1e6;
        assert!(matches!(
            expected_residual(&st, &data),
            Err(Error::NegativeResidual(_))
        ));
    }

    #[test]
    fn elbo_drops_when_code_covariance_is_mis_set() {
        let (mut st, data) = random_state(3, 4, 6, 41);
        let cfg = ModelConfig::vb_defaults(4);
        update_codes(&mut st, &data).unwrap();
        let fitted = compute_elbo(&st, &data, &cfg).unwrap();
        let mut bad = st.clone();
        for cov in &mut bad.code_covs {
            *cov *= 3.0;
        }
        assert!(compute_elbo(&bad, &data, &cfg).unwrap() < fitted);
    }

    #[test]
    fn every_update_ascends_the_bound() {
        let (mut st, data) = random_state(5, 4, 12, 13);
        let cfg = ModelConfig::vb_defaults(4);
        let mut prev = compute_elbo(&st, &data, &cfg).unwrap();
        let check = |prev: &mut f64, st: &VbState| {
            let now = compute_elbo(st, &data, &cfg).unwrap();
            assert!(now >= *prev - 1e-8 * prev.abs(), "{now} < {prev}");
            *prev = now;
        };
        for _ in 0..10 {
            update_codes(&mut st, &data).unwrap();
            check(&mut prev, &st);
            update_dictionary_full(&mut st, &data, cfg.beta).unwrap();
            check(&mut prev, &st);
            update_alpha(&mut st, &cfg);
            check(&mut prev, &st);
            update_gamma(&mut st, &data, &cfg).unwrap();
            check(&mut prev, &st);
        }
    }

    #[test]
    fn run_vb_recovers_square_noiseless_dictionary() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let (m, l) = (4, 200);
        let mut truth = gaussian(m, m, &mut rng) + DMatrix::identity(m, m) * 3.0;
        crate::linalg::normalize_columns(&mut truth);
        let mut x = DMatrix::zeros(m, l);
        for j in 0..l {
            let k = rand::Rng::random_range(&mut rng, 0..m);
            x[(k, j)] = StandardNormal.sample(&mut rng);
        }
        let data = TrainingSet::new(&truth * &x).unwrap();
        let mut cfg = ModelConfig::vb_defaults(m).with_seed(3);
        cfg.max_iters = 500;
        let run = run_vb(&cfg, &data, DictUpdate::Full).unwrap();
        let xm = run.state.code_mean_matrix();
        let rel = (data.y() - &run.state.dict_mean * xm).norm() / data.y().norm();
        assert!(rel < 1e-3, "relative error {rel}");
        for w in run.trace.windows(2) {
            assert!(w[1].elbo >= w[0].elbo - 1e-8 * w[0].elbo.abs());
        }
    }
}
