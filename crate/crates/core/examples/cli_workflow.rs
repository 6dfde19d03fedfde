//! The command workflows driven from code: a small benchmark grid, then
//! training from a matrix file, each replayed from its echoed config.

use sbdl::cli::{cmd_bench_synthetic, cmd_train, Engine, RunConfig};
use sbdl::matrix_io::write_matrix;
use sbdl::synthetic::{generate_synthetic, Sparsity, SyntheticSpec};

pub fn run_example() -> sbdl::Result<()> {
    let root = std::env::temp_dir().join("sbdl-cli-example");
    std::fs::create_dir_all(&root)?;

    let mut bench = RunConfig::parse(
        "engine = gibbs, vb-atomwise\n\
         signal_dim = 8\n\
         num_atoms = 12\n\
         num_signals = 150\n\
         snr_db = 30, 10\n\
         sparsity = 2\n\
         trials = 2\n\
         gibbs_iters = 60\n\
         burn_in = 50\n\
         vb_iters = 60\n",
        "inline",
    )?;
    bench.out = root.join("bench");
    let report = cmd_bench_synthetic(&bench)?;
    print!("{}", std::fs::read_to_string(bench.out.join("table.tsv"))?);
    println!(
        "mean success rate {}",
        report.get("success_rate").unwrap_or("-")
    );

    let data = generate_synthetic(&SyntheticSpec {
        m: 8,
        n: 12,
        l: 150,
        sparsity: Sparsity::Fixed(2),
        snr_db: 30.0,
        seed: 9,
    })?;
    let input = root.join("signals.txt");
    write_matrix(&data.signals, &input)?;
    let mut train = RunConfig {
        engine: vec![Engine::VbFull],
        num_atoms: 12,
        vb_iters: 80,
        input: Some(input),
        out: root.join("train"),
        ..RunConfig::default()
    };
    let first = cmd_train(&train)?;
    println!("trained: {:?}", first.metrics);

    train = RunConfig::load(&root.join("train/config.echo"))?;
    train.out = root.join("train-replay");
    cmd_train(&train)?;
    let a = std::fs::read(root.join("train/dictionary.txt"))?;
    let b = std::fs::read(root.join("train-replay/dictionary.txt"))?;
    println!("replay identical: {}", a == b);
    Ok(())
}

fn main() -> sbdl::Result<()> {
    run_example()
}
