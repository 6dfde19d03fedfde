//! Variational inference on a small synthetic problem: ELBO trace for the joint
//! dictionary update, then the atom-by-atom variant on the same data.

use sbdl::metrics::match_and_score;
use sbdl::synthetic::{generate_synthetic, Sparsity, SyntheticSpec};
use sbdl::vb::{run_vb, DictUpdate};
use sbdl::{ModelConfig, TrainingSet};

pub fn run_example() -> sbdl::Result<()> {
    let spec = SyntheticSpec {
        m: 10,
        n: 20,
        l: 200,
        sparsity: Sparsity::Fixed(2),
        snr_db: 30.0,
        seed: 3,
    };
    let data = generate_synthetic(&spec)?;
    let ts = TrainingSet::new(data.signals.clone())?;
    let mut cfg = ModelConfig::vb_defaults(20).with_seed(3);
    cfg.max_iters = 150;

    for variant in [DictUpdate::Full, DictUpdate::Atomwise] {
        let run = run_vb(&cfg, &ts, variant)?;
        println!(
            "{variant:?}: {} sweeps, converged {}",
            run.iterations(),
            run.converged
        );
        for s in run.trace.iter().step_by(25) {
            println!(
                "  sweep {:>3}  elbo {:>12.3}  dD {:.2e}",
                s.iteration, s.elbo, s.dict_change
            );
        }
        let noise = run.state.gamma_mean().sqrt().recip();
        let score = match_and_score(&data.dictionary, &run.state.dict_mean, 0.01)?;
        println!(
            "  noise std {noise:.4e} (true {:.4e}), success rate {:.2}",
            data.sigma, score.success_rate
        );
    }
    Ok(())
}

fn main() -> sbdl::Result<()> {
    run_example()
}
