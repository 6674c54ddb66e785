//! Load the IDX files and dump a few digits as PGM.
//!
//!     cargo run --example load_mnist -- [data/mnist] [out_dir]

use std::path::PathBuf;

use grbfl::data::load_mnist;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "data/mnist".into()));
    let out = PathBuf::from(
        args.next()
            .unwrap_or_else(|| std::env::temp_dir().display().to_string()),
    );

    let train = load_mnist(dir.join("train-images-idx3-ubyte"), dir.join("train-labels-idx1-ubyte"))?;
    println!("{} images, {} classes", train.len(), train.num_classes());

    let mut counts = vec![0usize; train.num_classes()];
    for &l in train.labels() {
        counts[l] += 1;
    }
    println!("per class: {counts:?}");

    for (i, (img, label)) in train.iter().take(3).enumerate() {
        let path = out.join(format!("digit_{i}_label_{label}.pgm"));
        img.write_pgm(&path)?;
        let mean = img.pixels().iter().sum::<f64>() / img.len() as f64;
        println!(
            "{}: {}x{}, mean intensity {mean:.3}",
            path.display(),
            img.width(),
            img.height()
        );
    }
    Ok(())
}
