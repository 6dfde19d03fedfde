//! Learn a 20x50 dictionary from 1000 noisy 3-sparse signals with the Gibbs
//! sampler and count how many true atoms come back.
//!
//! Usage: cargo run --release --example synthetic_recovery -- [seed] [snr_db] [K]

use sbdl::gibbs::{estimate_dictionary, run_gibbs};
use sbdl::metrics::{match_and_score, DEFAULT_SUCCESS_THRESHOLD};
use sbdl::synthetic::{generate_synthetic, Sparsity, SyntheticSpec};
use sbdl::{ModelConfig, TrainingSet};

pub fn run_example() -> sbdl::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_string());
    let seed: u64 = arg(0, "0").parse().expect("seed");
    let snr_db: f64 = arg(1, "30").parse().expect("snr_db");
    let k: usize = arg(2, "3").parse().expect("K");

    let spec = SyntheticSpec {
        m: 20,
        n: 50,
        l: 1000,
        sparsity: Sparsity::Fixed(k),
        snr_db,
        seed,
    };
    let data = generate_synthetic(&spec)?;
    println!("noise std {:.4e} at {snr_db} dB", data.sigma);

    let cfg = ModelConfig::gibbs_defaults(50).with_seed(seed);
    let (trace, _) = run_gibbs(&cfg, &TrainingSet::new(data.signals)?)?;
    for (i, (r, g)) in trace
        .residual_per_iter
        .iter()
        .zip(&trace.gamma_per_iter)
        .enumerate()
        .step_by(50)
    {
        println!("iter {i:>3}  |Y-DX| {r:>9.4}  gamma {g:.3e}");
    }

    let learned = estimate_dictionary(&trace, cfg.dict_estimate)?;
    let report = match_and_score(&data.dictionary, &learned, DEFAULT_SUCCESS_THRESHOLD)?;
    println!(
        "recovered {}/50 atoms (success rate {:.2})",
        report.recovered(),
        report.success_rate
    );
    Ok(())
}

fn main() -> sbdl::Result<()> {
    run_example()
}
