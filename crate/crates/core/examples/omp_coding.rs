//! Sparse coding with orthogonal matching pursuit: exact recovery of 3-sparse
//! signals over a random 16x32 dictionary, then error-constrained coding.

use nalgebra::DMatrix;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sbdl::linalg::normalize_columns;
use sbdl::omp::{batch_encode, OmpStop};

pub fn run_example() -> sbdl::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut dict = DMatrix::from_fn(16, 32, |_, _| StandardNormal.sample(&mut rng));
    normalize_columns(&mut dict);

    let mut codes = DMatrix::zeros(32, 100);
    for l in 0..100 {
        for i in index::sample(&mut rng, 32, 3) {
            let v: f64 = StandardNormal.sample(&mut rng);
            codes[(i, l)] = v.signum() * (1.0 + v.abs());
        }
    }
    let signals = &dict * &codes;

    let results = batch_encode(&dict, &signals, &OmpStop::sparsity(3))?;
    let exact = results
        .iter()
        .enumerate()
        .filter(|(l, c)| {
            let mut s = c.support.clone();
            s.sort_unstable();
            let truth: Vec<usize> = (0..32).filter(|&i| codes[(i, *l)] != 0.0).collect();
            s == truth
        })
        .count();
    println!("exact support recovery: {exact}/100");

    let noisy = signals.map(|v| {
        let z: f64 = StandardNormal.sample(&mut rng);
        v + 0.05 * z
    });
    let stop = OmpStop::for_noise(0.05, 1.15, 16);
    let coded = batch_encode(&dict, &noisy, &stop)?;
    let avg = coded.iter().map(|c| c.support.len()).sum::<usize>() as f64 / 100.0;
    println!(
        "error-constrained (threshold {:.3}): {avg:.2} atoms per signal",
        stop.residual_threshold.unwrap_or(0.0)
    );
    Ok(())
}

fn main() -> sbdl::Result<()> {
    run_example()
}
