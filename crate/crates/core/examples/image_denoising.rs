//! Denoise a 128x128 crop of the cameraman image (sigma = 25): train a 64x256
//! dictionary on stride-2 noisy patches with the Gibbs sampler, OMP-code every
//! overlapping patch, and average.
//!
//! Usage: cargo run --release --example image_denoising -- [gibbs_iters]

use sbdl::denoise::{denoise_image, training_patches, DenoiseOptions};
use sbdl::gibbs::{estimate_dictionary, run_gibbs};
use sbdl::image::{add_gaussian_noise, load_pgm, save_pgm};
use sbdl::metrics::{psnr, psnr_conventional};
use sbdl::{ModelConfig, TrainingSet};

pub fn run_example() -> sbdl::Result<()> {
    let iters: usize = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("iteration count"))
        .unwrap_or(40);
    let sigma = 25.0;
    let clean = load_pgm(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/tests/data/cameraman_128.pgm"
    ))?;
    let noisy = add_gaussian_noise(&clean, sigma, 7);

    let signals = training_patches(&noisy, 8, 2, false)?;
    println!(
        "training on {} patches for {iters} Gibbs iterations",
        signals.ncols()
    );
    let mut cfg = ModelConfig::gibbs_defaults(256).with_seed(1);
    cfg.max_iters = iters;
    cfg.burn_in = iters - 1;
    let (trace, state) = run_gibbs(&cfg, &TrainingSet::new(signals)?)?;
    let dict = estimate_dictionary(&trace, cfg.dict_estimate)?;
    println!("estimated noise std {:.2}", state.gamma.sqrt().recip());

    let out = denoise_image(&dict, &noisy, &DenoiseOptions::new(sigma))?;
    println!("average atoms per patch {:.2}", out.mean_sparsity);
    println!(
        "PSNR noisy {:.2} dB -> denoised {:.2} dB (conventional {:.2} -> {:.2})",
        psnr(&clean, &noisy)?,
        psnr(&clean, &out.image)?,
        psnr_conventional(&clean, &noisy)?,
        psnr_conventional(&clean, &out.image)?
    );
    let path = std::env::temp_dir().join("sbdl-denoised.pgm");
    save_pgm(&out.image, &path)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn main() -> sbdl::Result<()> {
    run_example()
}
