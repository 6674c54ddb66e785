//! Invert one shared gradient twice: pixels through an MLP, and rectangle
//! values through the GCN.
//!
//!     cargo run --release --example gradient_attack -- [index]

use grbfl::attack::{reconstruct_graph_features, reconstruct_pixels, AttackConfig, AttackInit, AttackObservation};
use grbfl::data::load_mnist;
use grbfl::granulation::{granulate, GranulationConfig};
use grbfl::graph::build_graph;
use grbfl::nn::{Classifier, GcnModel, MlpModel, ParamVector, PreparedGraph};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let index: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(0);
    let train = load_mnist(
        "data/mnist/train-images-idx3-ubyte",
        "data/mnist/train-labels-idx1-ubyte",
    )?;
    let (img, label) = train.iter().nth(index).ok_or("index out of range")?;
    let out = std::env::temp_dir();
    img.write_pgm(out.join("attack_truth.pgm"))?;

    let mlp = MlpModel::new(img.len(), 64, 10);
    let params = ParamVector::glorot(mlp.layout().clone(), 0);
    let obs = AttackObservation::capture(&mlp, &params, img, label)?;
    let pixels = reconstruct_pixels(&mlp, &obs, img, &AttackConfig::default())?;
    pixels.image.write_pgm(out.join("attack_pixels.pgm"))?;
    println!(
        "pixel attack: loss {:.3e} after {} iterations, MSE {:.4}, S_p {:.4}",
        pixels.loss,
        pixels.trace.len(),
        pixels.mse,
        pixels.s_p
    );

    let graph = build_graph(
        &granulate(img, &GranulationConfig::default())?,
        img.width(),
        img.height(),
        label,
    )?;
    let gcn = GcnModel::new(64, 10);
    let params = ParamVector::glorot(gcn.layout().clone(), 0);
    let obs = AttackObservation::capture(&gcn, &params, &PreparedGraph::new(&graph), label)?;
    let cfg = AttackConfig {
        init: AttackInit::Constant(0.5),
        ..Default::default()
    };
    let rects = reconstruct_graph_features(&gcn, &obs, &graph, img, &cfg)?;
    rects.image.write_pgm(out.join("attack_graph.pgm"))?;
    println!(
        "graph attack: loss {:.3e} after {} iterations, MSE {:.4}, S_p {:.4} ({} nodes)",
        rects.loss,
        rects.trace.len(),
        rects.mse,
        rects.s_p,
        graph.num_nodes()
    );
    println!("images in {}", out.display());
    Ok(())
}
