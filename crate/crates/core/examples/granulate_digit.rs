//! Cover one digit with granular rectangles and render the cover back.
//!
//!     cargo run --example granulate_digit -- [index]

use grbfl::attack::render_rectangles;
use grbfl::data::load_mnist;
use grbfl::granulation::{granulate, sobel_gradient, GranulationConfig};
use grbfl::graph::node_features;
use grbfl::metrics::mse;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let index: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(0);
    let train = load_mnist(
        "data/mnist/train-images-idx3-ubyte",
        "data/mnist/train-labels-idx1-ubyte",
    )?;
    let (img, label) = train.iter().nth(index).ok_or("index out of range")?;
    let (w, h) = (img.width(), img.height());

    let grad = sobel_gradient(img);
    let peak = grad.magnitudes.iter().cloned().fold(0.0, f64::max);
    println!("digit {label}: max Sobel magnitude {peak:.3}");

    let cfg = GranulationConfig::default();
    let rects = granulate(img, &cfg)?;
    println!("{} rectangles for {} pixels", rects.len(), w * h);
    for r in rects.iter().filter(|r| r.r_x + r.r_y > 0).take(8) {
        println!(
            "  center ({:>2},{:>2}) radii ({},{}) mean {:.3} var {:.4} purity {:.3}",
            r.center_x, r.center_y, r.r_x, r.r_y, r.mean, r.variance, r.purity
        );
    }

    let features: Vec<_> = rects.iter().map(|r| node_features(r, w, h)).collect();
    let rendered = render_rectangles(&features, w, h)?;
    println!("render MSE against the digit: {:.5}", mse(img, &rendered)?);
    rendered.write_pgm(std::env::temp_dir().join("granulated.pgm"))?;
    Ok(())
}
