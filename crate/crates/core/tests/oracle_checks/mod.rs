//! Independent oracles for the variational updates and the Gibbs conditionals on
//! two-dimensional problems, where every posterior can be written out by hand.
//! Each check panics on a mismatch.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sbdl::gibbs::{sample_alpha, sample_atoms, sample_codes_with, sample_gamma, CodeSampler};
use sbdl::vb::{
    expected_residual, update_alpha, update_codes, update_dictionary_full, update_gamma,
};
use sbdl::{GibbsState, ModelConfig, TrainingSet, VbState};

const DRAWS: usize = 100_000;

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

fn inv2(m: &Matrix2<f64>) -> Matrix2<f64> {
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    Matrix2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]) / det
}

fn to2(m: &DMatrix<f64>) -> Matrix2<f64> {
    Matrix2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)])
}

fn data() -> TrainingSet {
    TrainingSet::new(DMatrix::from_row_slice(2, 2, &[1.3, -0.4, 0.2, 0.9])).unwrap()
}

fn cfg() -> ModelConfig {
    let mut cfg = ModelConfig::vb_defaults(2);
    cfg.beta = 2.5;
    cfg
}

fn vb_state() -> VbState {
    let c0 = DMatrix::from_row_slice(2, 2, &[0.30, 0.05, 0.05, 0.20]);
    let c1 = DMatrix::from_row_slice(2, 2, &[0.10, -0.02, -0.02, 0.40]);
    VbState {
        code_means: vec![
            DVector::from_vec(vec![0.7, -0.3]),
            DVector::from_vec(vec![-0.2, 1.1]),
        ],
        code_covs: vec![c0, c1],
        dict_mean: DMatrix::from_row_slice(2, 2, &[0.8, 0.3, -0.5, 1.2]),
        dict_row_cov: DMatrix::from_row_slice(2, 2, &[0.05, 0.01, 0.01, 0.08]),
        alpha_shape: 1.0,
        alpha_rates: DMatrix::from_row_slice(2, 2, &[0.5, 2.0, 1.5, 0.25]),
        gamma_shape: 3.0,
        gamma_rate: 1.5,
    }
}

/// Expected residual by summing `E|y_l - D x_l|^2` signal by signal, with the
/// dictionary rows and the code independent under q.
fn residual_oracle(s: &VbState, y: &DMatrix<f64>) -> f64 {
    let d = to2(&s.dict_mean);
    let a = to2(&s.dict_row_cov);
    let mut total = 0.0;
    for l in 0..2 {
        let yl = Vector2::new(y[(0, l)], y[(1, l)]);
        let mu = Vector2::new(s.code_means[l][0], s.code_means[l][1]);
        let sig = to2(&s.code_covs[l]);
        let second = mu * mu.transpose() + sig;
        let dtd = d.transpose() * d + a * 2.0;
        total += yl.dot(&yl) - 2.0 * yl.dot(&(d * mu)) + (dtd * second).trace();
    }
    total
}

pub fn vb_code_update_matches_hand_inverse() {
    let mut s = vb_state();
    let before = s.clone();
    let y = data();
    update_codes(&mut s, &y).unwrap();
    let g = before.gamma_shape / before.gamma_rate;
    let d = to2(&before.dict_mean);
    let dtd = d.transpose() * d + to2(&before.dict_row_cov) * 2.0;
    for l in 0..2 {
        let alpha = Matrix2::new(
            before.alpha_shape / before.alpha_rates[(0, l)],
            0.0,
            0.0,
            before.alpha_shape / before.alpha_rates[(1, l)],
        );
        let sigma = inv2(&(dtd * g + alpha));
        let mu = sigma * d.transpose() * Vector2::new(y.y()[(0, l)], y.y()[(1, l)]) * g;
        for i in 0..2 {
            assert!(close(s.code_means[l][i], mu[i], 1e-10));
            for j in 0..2 {
                assert!(close(s.code_covs[l][(i, j)], sigma[(i, j)], 1e-10));
            }
        }
    }
}

pub fn vb_dictionary_update_matches_hand_inverse() {
    let mut s = vb_state();
    let before = s.clone();
    let y = data();
    let cfg = cfg();
    update_dictionary_full(&mut s, &y, cfg.beta).unwrap();
    let g = before.gamma_shape / before.gamma_rate;
    let mut xxt = Matrix2::zeros();
    let mut x = Matrix2::zeros();
    for l in 0..2 {
        let mu = Vector2::new(before.code_means[l][0], before.code_means[l][1]);
        xxt += mu * mu.transpose() + to2(&before.code_covs[l]);
        x.set_column(l, &mu);
    }
    let a = inv2(&(xxt * g + Matrix2::identity() / cfg.beta));
    let d = to2(y.y()) * x.transpose() * a * g;
    for i in 0..2 {
        for j in 0..2 {
            assert!(close(s.dict_row_cov[(i, j)], a[(i, j)], 1e-10));
            assert!(close(s.dict_mean[(i, j)], d[(i, j)], 1e-10));
        }
    }
}

pub fn vb_precision_updates_match_hand_arithmetic() {
    let mut s = vb_state();
    let y = data();
    let cfg = cfg();
    update_alpha(&mut s, &cfg);
    assert_eq!(s.alpha_shape, cfg.a + 0.5);
    for l in 0..2 {
        for n in 0..2 {
            let sq = s.code_means[l][n].powi(2) + s.code_covs[l][(n, n)];
            assert!(close(s.alpha_rates[(n, l)], cfg.b + 0.5 * sq, 1e-12));
        }
    }
    let oracle = residual_oracle(&s, y.y());
    assert!(close(expected_residual(&s, &y).unwrap(), oracle, 1e-10));
    update_gamma(&mut s, &y, &cfg).unwrap();
    assert!(close(s.gamma_shape, 2.0 + cfg.c, 1e-15));
    assert!(close(s.gamma_rate, cfg.d + 0.5 * oracle, 1e-10));
}

pub fn expected_residual_matches_monte_carlo() {
    let s = vb_state();
    let y = data();
    let exact = expected_residual(&s, &y).unwrap();
    let a = nalgebra::Cholesky::new(s.dict_row_cov.clone()).unwrap().l();
    let codes: Vec<DMatrix<f64>> = s
        .code_covs
        .iter()
        .map(|c| nalgebra::Cholesky::new(c.clone()).unwrap().l())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut z = || -> f64 { StandardNormal.sample(&mut rng) };
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..DRAWS {
        let mut d = s.dict_mean.clone();
        for i in 0..2 {
            let row = &a * DVector::from_vec(vec![z(), z()]);
            d[(i, 0)] += row[0];
            d[(i, 1)] += row[1];
        }
        let mut r = 0.0;
        for l in 0..2 {
            let x = &s.code_means[l] + &codes[l] * DVector::from_vec(vec![z(), z()]);
            r += (y.y().column(l) - &d * x).norm_squared();
        }
        sum += r;
        sum_sq += r * r;
    }
    let mean = sum / DRAWS as f64;
    let se = ((sum_sq / DRAWS as f64 - mean * mean) / DRAWS as f64).sqrt();
    assert!(
        (mean - exact).abs() < 3.0 * se,
        "{mean} vs {exact} (se {se})"
    );
}

fn gibbs_state(seed: u64) -> GibbsState {
    GibbsState {
        x: DMatrix::from_row_slice(2, 2, &[0.6, -0.8, 0.25, 1.1]),
        d: DMatrix::from_row_slice(2, 2, &[0.9, 0.2, -0.4, 1.3]),
        alpha: DMatrix::from_row_slice(2, 2, &[0.7, 3.0, 1.6, 0.4]),
        gamma: 2.2,
        rng: ChaCha8Rng::seed_from_u64(seed),
    }
}

/// Streaming first and second moments of a scalar sample.
#[derive(Default)]
struct Moments {
    n: f64,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1.0;
        self.sum += v;
        self.sum_sq += v * v;
    }

    fn mean(&self) -> f64 {
        self.sum / self.n
    }

    fn var(&self) -> f64 {
        self.sum_sq / self.n - self.mean().powi(2)
    }

    /// Checks mean and variance against exact values to 3 standard errors,
    /// using the Gaussian fourth moment for the variance.
    fn check_gaussian(&self, mean: f64, var: f64, what: &str) {
        let se_mean = (var / self.n).sqrt();
        let se_var = var * (2.0 / self.n).sqrt();
        assert!(
            (self.mean() - mean).abs() < 3.0 * se_mean,
            "{what} mean {} vs {mean}",
            self.mean()
        );
        assert!(
            (self.var() - var).abs() < 3.0 * se_var,
            "{what} variance {} vs {var}",
            self.var()
        );
    }

    /// Same for a Gamma(shape, rate) sample: variance of the sample variance
    /// from the central fourth moment `(3 shape^2 + 6 shape) / rate^4`.
    fn check_gamma(&self, shape: f64, rate: f64, what: &str) {
        let mean = shape / rate;
        let var = shape / rate.powi(2);
        let mu4 = (3.0 * shape * shape + 6.0 * shape) / rate.powi(4);
        let se_mean = (var / self.n).sqrt();
        let se_var = ((mu4 - var * var) / self.n).sqrt();
        assert!(
            (self.mean() - mean).abs() < 3.0 * se_mean,
            "{what} mean {} vs {mean}",
            self.mean()
        );
        assert!(
            (self.var() - var).abs() < 3.0 * se_var,
            "{what} variance {} vs {var}",
            self.var()
        );
    }
}

fn check_code_sampler(sampler: CodeSampler, seed: u64) {
    let y = data();
    let mut st = gibbs_state(seed);
    let d = to2(&st.d);
    let mut stats: Vec<Moments> = (0..4).map(|_| Moments::default()).collect();
    let mut cross = [0.0f64; 2];
    for _ in 0..DRAWS / 2 {
        sample_codes_with(&mut st, &y, sampler).unwrap();
        for l in 0..2 {
            stats[2 * l].push(st.x[(0, l)]);
            stats[2 * l + 1].push(st.x[(1, l)]);
            cross[l] += st.x[(0, l)] * st.x[(1, l)];
        }
    }
    for l in 0..2 {
        let lambda = Matrix2::new(st.alpha[(0, l)], 0.0, 0.0, st.alpha[(1, l)]);
        let sigma = inv2(&(d.transpose() * d * st.gamma + lambda));
        let mu = sigma * d.transpose() * Vector2::new(y.y()[(0, l)], y.y()[(1, l)]) * st.gamma;
        for i in 0..2 {
            stats[2 * l + i].check_gaussian(
                mu[i],
                sigma[(i, i)],
                &format!("{sampler:?} x[{i},{l}]"),
            );
        }
        let n = stats[2 * l].n;
        let cov = cross[l] / n - stats[2 * l].mean() * stats[2 * l + 1].mean();
        let se = ((sigma[(0, 0)] * sigma[(1, 1)] + sigma[(0, 1)].powi(2)) / n).sqrt();
        assert!(
            (cov - sigma[(0, 1)]).abs() < 3.0 * se,
            "{sampler:?} covariance {cov}"
        );
    }
}

pub fn code_conditional_precision_route() {
    check_code_sampler(CodeSampler::Precision, 21);
}

pub fn code_conditional_low_rank_route() {
    check_code_sampler(CodeSampler::LowRank, 22);
}

pub fn atom_conditionals_are_sequential() {
    let y = data();
    let beta = 1.7;
    let init = gibbs_state(31);
    let mut st = init.clone();
    let (xr0, xr1) = (init.x.row(0).transpose(), init.x.row(1).transpose());
    let var0 = 1.0 / (init.gamma * xr0.norm_squared() + 1.0 / beta);
    let var1 = 1.0 / (init.gamma * xr1.norm_squared() + 1.0 / beta);
    let mut first: Vec<Moments> = (0..2).map(|_| Moments::default()).collect();
    let mut second: Vec<Moments> = (0..2).map(|_| Moments::default()).collect();
    for _ in 0..DRAWS {
        st.d.copy_from(&init.d);
        sample_atoms(&mut st, &y, beta).unwrap();
        // atom 0 sees the initial atom 1; atom 1 sees the fresh atom 0
        let d0 = st.d.column(0).into_owned();
        let y_minus_1 = y.y() - &d0 * xr0.transpose();
        let mean1 = &y_minus_1 * &xr1 * (init.gamma * var1);
        for i in 0..2 {
            first[i].push(d0[i]);
            second[i].push(st.d[(i, 1)] - mean1[i]);
        }
    }
    let y_minus_0 = y.y() - init.d.column(1) * xr1.transpose();
    let mean0 = &y_minus_0 * &xr0 * (init.gamma * var0);
    for i in 0..2 {
        first[i].check_gaussian(mean0[i], var0, &format!("d[{i},0]"));
        second[i].check_gaussian(0.0, var1, &format!("d[{i},1] centred"));
    }
}

pub fn precision_conditionals_are_gamma() {
    let y = data();
    let cfg = cfg();
    let mut st = gibbs_state(41);
    let mut alpha: Vec<Moments> = (0..4).map(|_| Moments::default()).collect();
    let mut gamma = Moments::default();
    for _ in 0..DRAWS {
        sample_alpha(&mut st, &cfg).unwrap();
        sample_gamma(&mut st, &y, &cfg).unwrap();
        for (k, v) in st.alpha.iter().enumerate() {
            alpha[k].push(*v);
        }
        gamma.push(st.gamma);
    }
    for (k, x) in st.x.iter().enumerate() {
        alpha[k].check_gamma(cfg.a + 0.5, cfg.b + 0.5 * x * x, &format!("alpha[{k}]"));
    }
    let resid = (y.y() - &st.d * &st.x).norm_squared();
    gamma.check_gamma(cfg.c + 2.0, cfg.d + 0.5 * resid, "gamma");
}

/// Every check with its name.
pub const ALL: &[(&str, fn())] = &[
    (
        "vb_code_update_matches_hand_inverse",
        vb_code_update_matches_hand_inverse,
    ),
    (
        "vb_dictionary_update_matches_hand_inverse",
        vb_dictionary_update_matches_hand_inverse,
    ),
    (
        "vb_precision_updates_match_hand_arithmetic",
        vb_precision_updates_match_hand_arithmetic,
    ),
    (
        "expected_residual_matches_monte_carlo",
        expected_residual_matches_monte_carlo,
    ),
    (
        "code_conditional_precision_route",
        code_conditional_precision_route,
    ),
    (
        "code_conditional_low_rank_route",
        code_conditional_low_rank_route,
    ),
    (
        "atom_conditionals_are_sequential",
        atom_conditionals_are_sequential,
    ),
    (
        "precision_conditionals_are_gamma",
        precision_conditionals_are_gamma,
    ),
];
