//! The three workflows behind the `sbdl` binary: synthetic recovery benchmark,
//! dictionary training, and image denoising.
//!
//! Each command writes its artifacts, a `report.txt` and a `config.echo` into
//! the output directory. Running a command again with `--config config.echo`
//! reproduces every artifact byte for byte.

mod config;
mod report;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;

pub use config::{Engine, RunConfig};
pub use report::RunReport;

use crate::denoise::{denoise_image, training_patches, DenoiseOptions};
use crate::error::{Error, Result};
use crate::gibbs::{estimate_dictionary, run_gibbs_observed, CodeSampler};
use crate::image::{load_pgm, save_pgm};
use crate::matrix_io::{format_matrix, read_matrix};
use crate::metrics::{match_and_score, psnr, psnr_conventional, reconstruction_error};
use crate::model::{ModelConfig, TrainingSet};
use crate::synthetic::{generate_synthetic, SyntheticSpec};
use crate::vb::{run_vb, DictUpdate};

/// A trained dictionary plus run diagnostics.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub dictionary: DMatrix<f64>,
    pub iterations: usize,
    /// `|Y - D X|_F` at the end of the run (posterior means for VB).
    pub final_residual: f64,
    pub elbo_final: Option<f64>,
    /// Final noise precision: `<gamma>` for VB, the last draw for Gibbs.
    pub noise_precision: f64,
    pub converged: Option<bool>,
    /// Per-iteration trace as a tab-separated table with a header line.
    pub trace_tsv: String,
}

pub fn fit_dictionary(
    engine: Engine,
    cfg: &ModelConfig,
    sampler: CodeSampler,
    data: &TrainingSet,
) -> Result<FitOutcome> {
    let mut trace = String::new();
    match engine {
        Engine::VbFull | Engine::VbAtomwise => {
            let variant = if engine == Engine::VbFull {
                DictUpdate::Full
            } else {
                DictUpdate::Atomwise
            };
            let run = run_vb(cfg, data, variant)?;
            trace.push_str("sweep\telbo\tdict_change\n");
            for s in &run.trace {
                writeln!(trace, "{}\t{}\t{}", s.iteration, s.elbo, s.dict_change).unwrap();
            }
            let x = run.state.code_mean_matrix();
            Ok(FitOutcome {
                final_residual: reconstruction_error(data.y(), &run.state.dict_mean, &x)?,
                iterations: run.iterations(),
                elbo_final: run.trace.last().map(|s| s.elbo),
                noise_precision: run.state.gamma_mean(),
                converged: Some(run.converged),
                dictionary: run.state.dict_mean,
                trace_tsv: trace,
            })
        }
        Engine::Gibbs => {
            let (chain, state) = run_gibbs_observed(cfg, data, sampler, |_, _| {})?;
            trace.push_str("iter\tresidual\tgamma\n");
            for (i, (r, g)) in chain
                .residual_per_iter
                .iter()
                .zip(&chain.gamma_per_iter)
                .enumerate()
            {
                writeln!(trace, "{}\t{r}\t{g}", i + 1).unwrap();
            }
            Ok(FitOutcome {
                dictionary: estimate_dictionary(&chain, cfg.dict_estimate)?,
                iterations: chain.residual_per_iter.len(),
                final_residual: chain.residual_per_iter.last().copied().unwrap_or(f64::NAN),
                elbo_final: None,
                noise_precision: state.gamma,
                converged: None,
                trace_tsv: trace,
            })
        }
    }
}

struct Outputs<'a> {
    dir: &'a Path,
    report: RunReport,
    started: Instant,
}

impl<'a> Outputs<'a> {
    fn new(cfg: &'a RunConfig, command: &str) -> Result<Self> {
        fs::create_dir_all(&cfg.out)?;
        Ok(Self {
            dir: &cfg.out,
            report: RunReport::new(command, cfg.echo()),
            started: Instant::now(),
        })
    }

    fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.report.artifact_paths.push(name.to_string());
        Ok(())
    }

    fn finish(mut self) -> Result<RunReport> {
        let echo = self.report.config_echo.clone();
        self.write("config.echo", echo)?;
        self.report.artifact_paths.push("report.txt".into());
        fs::write(self.dir.join("report.txt"), self.report.render())?;
        self.report.wall_time_seconds = self.started.elapsed().as_secs_f64();
        Ok(self.report)
    }
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        f64::NAN
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Runs `trials` seeded trials per grid cell `(num_signals, snr_db, sparsity)`
/// and engine. Trial `t` uses seed `seed + t` for both data and inference.
/// A failing trial is recorded in `trials.tsv` and the grid continues.
pub fn cmd_bench_synthetic(cfg: &RunConfig) -> Result<RunReport> {
    if cfg.trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    let mut out = Outputs::new(cfg, "bench-synthetic")?;
    let mut table =
        String::from("engine\tnum_signals\tsnr_db\tsparsity\ttrials\tfailed\tmean_success_rate\n");
    let mut rows = String::from(
        "engine\tnum_signals\tsnr_db\tsparsity\ttrial\tseed\tstatus\tsuccess_rate\titerations\tfinal_residual\n",
    );
    let mut all_rates = Vec::new();
    let (mut failed, mut iterations, mut cells) = (0usize, 0usize, 0usize);
    let mut last_residual = f64::NAN;
    let mut last_elbo = None;

    for &l in &cfg.num_signals {
        for &snr in &cfg.snr_db {
            for &sparsity in &cfg.sparsity {
                for &engine in &cfg.engine {
                    cells += 1;
                    let mut rates = Vec::new();
                    for t in 0..cfg.trials {
                        let seed = cfg.seed.wrapping_add(t as u64);
                        let spec = SyntheticSpec {
                            m: cfg.signal_dim,
                            n: cfg.num_atoms,
                            l,
                            sparsity,
                            snr_db: snr,
                            seed,
                        };
                        let trial = generate_synthetic(&spec).and_then(|data| {
                            let ts = TrainingSet::new(data.signals)?;
                            let model = cfg.model_config(engine, seed);
                            let fit = fit_dictionary(engine, &model, cfg.code_sampler, &ts)?;
                            let score =
                                match_and_score(&data.dictionary, &fit.dictionary, cfg.threshold)?;
                            Ok((fit, score.success_rate))
                        });
                        let prefix = format!("{engine}\t{l}\t{snr}\t{sparsity}\t{t}\t{seed}");
                        match trial {
                            Ok((fit, rate)) => {
                                writeln!(
                                    rows,
                                    "{prefix}\tok\t{rate}\t{}\t{}",
                                    fit.iterations, fit.final_residual
                                )
                                .unwrap();
                                rates.push(rate);
                                iterations += fit.iterations;
                                last_residual = fit.final_residual;
                                if fit.elbo_final.is_some() {
                                    last_elbo = fit.elbo_final;
                                }
                            }
                            Err(e) => {
                                failed += 1;
                                let msg = e.to_string().replace(['\t', '\n'], " ");
                                writeln!(rows, "{prefix}\terror: {msg}\t\t\t").unwrap();
                            }
                        }
                    }
                    writeln!(
                        table,
                        "{engine}\t{l}\t{snr}\t{sparsity}\t{}\t{}\t{}",
                        cfg.trials,
                        cfg.trials - rates.len(),
                        mean(&rates)
                    )
                    .unwrap();
                    all_rates.extend(rates);
                }
            }
        }
    }

    out.write("table.tsv", &table)?;
    out.write("trials.tsv", &rows)?;
    let r = &mut out.report;
    r.metric("success_rate", mean(&all_rates));
    r.metric("grid_cells", cells);
    r.metric("trials_run", cells * cfg.trials);
    r.metric("failed_trials", failed);
    r.metric("iterations_run", iterations);
    r.metric("final_residual", last_residual);
    if let Some(e) = last_elbo {
        r.metric("elbo_final", e);
    }
    out.finish()
}

fn training_data(cfg: &RunConfig) -> Result<TrainingSet> {
    match (&cfg.input, &cfg.image) {
        (Some(path), None) => TrainingSet::new(read_matrix(path)?),
        (None, Some(path)) => {
            let image = load_pgm(path)?;
            TrainingSet::new(training_patches(
                &image,
                cfg.patch,
                cfg.stride,
                cfg.remove_mean,
            )?)
        }
        (Some(_), Some(_)) => Err(Error::InvalidConfig(
            "set either `input` or `image`, not both".into(),
        )),
        (None, None) => Err(Error::InvalidConfig(
            "training needs `input` (matrix file) or `image` (PGM)".into(),
        )),
    }
}

/// Learns a dictionary from a matrix file or from the stride-`stride` patches
/// of an image, and writes `dictionary.txt` and `trace.tsv`.
pub fn cmd_train(cfg: &RunConfig) -> Result<RunReport> {
    let engine = cfg.single_engine()?;
    let data = training_data(cfg)?;
    let mut out = Outputs::new(cfg, "train")?;
    let model = cfg.model_config(engine, cfg.seed);
    let fit = fit_dictionary(engine, &model, cfg.code_sampler, &data)?;
    out.write("dictionary.txt", format_matrix(&fit.dictionary))?;
    out.write("trace.tsv", &fit.trace_tsv)?;
    let r = &mut out.report;
    r.metric("engine", engine);
    r.metric("signal_dim", data.dim());
    r.metric("num_signals", data.len());
    r.metric("iterations_run", fit.iterations);
    if let Some(c) = fit.converged {
        r.metric("converged", c);
    }
    r.metric("final_residual", fit.final_residual);
    if let Some(e) = fit.elbo_final {
        r.metric("elbo_final", e);
    }
    r.metric("noise_sigma_estimate", fit.noise_precision.sqrt().recip());
    out.finish()
}

/// Denoises `image` with the dictionary in `dictionary` and writes `denoised.pgm`.
/// With a `clean` reference, PSNR before and after is reported.
pub fn cmd_denoise(cfg: &RunConfig) -> Result<RunReport> {
    let dict_path = cfg
        .dictionary
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("denoising needs `dictionary`".into()))?;
    let image_path = cfg
        .image
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("denoising needs `image`".into()))?;
    let sigma = cfg
        .sigma
        .ok_or_else(|| Error::InvalidConfig("denoising needs `sigma`".into()))?;
    let dict = read_matrix(dict_path)?;
    let noisy = load_pgm(image_path)?;
    let clean = cfg.clean.as_ref().map(load_pgm).transpose()?;

    let mut out = Outputs::new(cfg, "denoise")?;
    let opts = DenoiseOptions {
        sigma,
        gain: cfg.gain,
        patch: cfg.patch,
        remove_mean: cfg.remove_mean,
    };
    let result = denoise_image(&dict, &noisy, &opts)?;
    // metrics describe the 8-bit file actually written
    let written = result.image.map(f64::round);
    save_pgm(&written, cfg.out.join("denoised.pgm"))?;
    out.report.artifact_paths.push("denoised.pgm".into());
    let r = &mut out.report;
    r.metric("omp_threshold", opts.threshold());
    r.metric("mean_sparsity", result.mean_sparsity);
    r.metric("normalized_dictionary", result.normalized_dictionary);
    if let Some(clean) = clean {
        let before = psnr(&clean, &noisy)?;
        let after = psnr(&clean, &written)?;
        r.metric("psnr_input", before);
        r.metric("psnr", after);
        r.metric("psnr_gain", after - before);
        r.metric(
            "psnr_conventional_input",
            psnr_conventional(&clean, &noisy)?,
        );
        r.metric("psnr_conventional", psnr_conventional(&clean, &written)?);
    }
    out.finish()
}
