//! PGM input/output and the overlapping-patch round trip used by denoising.

use sbdl::image::{extract_patches, load_pgm, reassemble_unclamped, save_pgm};

pub fn run_example() -> sbdl::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/cameraman_128.pgm");
    let image = load_pgm(path)?;
    println!(
        "loaded {}x{} image, mean intensity {:.1}",
        image.nrows(),
        image.ncols(),
        image.mean()
    );

    for stride in [1, 2, 4] {
        let (patches, grid) = extract_patches(&image, 8, stride)?;
        println!(
            "stride {stride}: {} patches of dimension {}",
            grid.num_patches(),
            patches.nrows()
        );
    }

    let (patches, grid) = extract_patches(&image, 8, 1)?;
    let back = reassemble_unclamped(&patches, &grid)?;
    println!("max round-trip error {:.1e}", (back - &image).abs().max());

    let dir = std::env::temp_dir().join("sbdl-patches-example");
    std::fs::create_dir_all(&dir)?;
    save_pgm(&image, dir.join("copy.pgm"))?;
    assert_eq!(load_pgm(dir.join("copy.pgm"))?, image);
    println!("wrote {}", dir.join("copy.pgm").display());
    Ok(())
}

fn main() -> sbdl::Result<()> {
    run_example()
}
