use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sbdl::cli::{cmd_bench_synthetic, cmd_denoise, cmd_train, RunConfig};

#[derive(Parser)]
#[command(name = "sbdl", version, about = "Sparse Bayesian dictionary learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Recovery benchmark on synthetic data over a grid of (L, SNR, K).
    BenchSynthetic(Shared),
    /// Learn a dictionary from a matrix file or image patches.
    Train {
        #[command(flatten)]
        shared: Shared,
        /// Training matrix, one signal per column.
        #[arg(long)]
        input: Option<PathBuf>,
        /// PGM image whose patches are the training signals.
        #[arg(long)]
        image: Option<PathBuf>,
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Denoise a PGM image with a learned dictionary.
    Denoise {
        #[command(flatten)]
        shared: Shared,
        #[arg(long)]
        dictionary: Option<PathBuf>,
        /// Noisy PGM image.
        #[arg(long)]
        image: Option<PathBuf>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        gain: Option<f64>,
        /// Clean reference image for PSNR.
        #[arg(long)]
        clean: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Shared {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// vb-full, vb-atomwise or gibbs (comma-separated for benchmarks).
    #[arg(long)]
    engine: Option<String>,
    /// Iteration budget for the selected engines.
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn push<T: ToString>(pairs: &mut Vec<(&'static str, String)>, key: &'static str, v: Option<T>) {
    if let Some(v) = v {
        pairs.push((key, v.to_string()));
    }
}

fn resolve(shared: Shared, extra: Vec<(&'static str, String)>) -> sbdl::Result<RunConfig> {
    let mut cfg = match &shared.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let mut pairs = Vec::new();
    push(&mut pairs, "seed", shared.seed);
    push(&mut pairs, "engine", shared.engine);
    push(&mut pairs, "burn_in", shared.burn_in);
    push(
        &mut pairs,
        "out",
        shared.out.map(|p| p.display().to_string()),
    );
    pairs.extend(extra);
    for (key, value) in pairs {
        cfg.set(key, &value, &format!("flag --{}", key.replace('_', "-")))?;
    }
    if let Some(iters) = shared.iters {
        if cfg.engine.iter().any(|e| e.is_vb()) {
            cfg.vb_iters = iters;
        }
        if cfg.engine.iter().any(|e| !e.is_vb()) {
            cfg.gibbs_iters = iters;
        }
    }
    Ok(cfg)
}

fn run(cli: Cli) -> sbdl::Result<sbdl::cli::RunReport> {
    let path = |p: Option<PathBuf>| p.map(|p| p.display().to_string());
    match cli.command {
        Command::BenchSynthetic(shared) => cmd_bench_synthetic(&resolve(shared, vec![])?),
        Command::Train {
            shared,
            input,
            image,
            stride,
        } => {
            let mut extra = Vec::new();
            push(&mut extra, "input", path(input));
            push(&mut extra, "image", path(image));
            push(&mut extra, "stride", stride);
            cmd_train(&resolve(shared, extra)?)
        }
        Command::Denoise {
            shared,
            dictionary,
            image,
            sigma,
            gain,
            clean,
        } => {
            let mut extra = Vec::new();
            push(&mut extra, "dictionary", path(dictionary));
            push(&mut extra, "image", path(image));
            push(&mut extra, "sigma", sigma);
            push(&mut extra, "gain", gain);
            push(&mut extra, "clean", path(clean));
            cmd_denoise(&resolve(shared, extra)?)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(report) => {
            print!("{}", report.render());
            println!("wall_time_seconds        {:.3}", report.wall_time_seconds);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
