//! Sparse Bayesian dictionary learning.
//!
//! A Gaussian–inverse-Gamma hierarchical model for learning overcomplete
//! dictionaries, with two inference engines:
//!
//! - [`vb`]: mean-field variational Bayes with joint or atom-by-atom dictionary updates;
//! - [`gibbs`]: a blocked Gibbs sampler with sequential atom sampling.
//!
//! Around them sit the synthetic recovery benchmark ([`synthetic`], [`metrics`]),
//! an OMP sparse coder ([`omp`]) and the overlapping-patch denoising pipeline
//! ([`image`], [`denoise`]). The [`cli`] module backs the `sbdl` binary.

pub mod cli;
pub mod denoise;
pub mod error;
pub mod gibbs;
pub mod image;
pub mod linalg;
pub mod matrix_io;
pub mod metrics;
pub mod model;
pub mod omp;
pub mod synthetic;
pub mod vb;

pub use error::{Error, Result};
pub use model::{
    initialize_gibbs_state, initialize_vb_state, validate_config, DictEstimate, Dims, GibbsState,
    ModelConfig, TrainingSet, VbState,
};
