//! FedProx against FedAvg on granular graphs of the bundled digits.
//!
//!     cargo run --release --example federated_training -- [train_n] [rounds]

use grbfl::data::{load_mnist, LabeledDataset};
use grbfl::federation::{partition, run_federation, FederationConfig};
use grbfl::granulation::{granulate, GranulationConfig};
use grbfl::graph::build_graph;
use grbfl::nn::{GcnModel, PreparedGraph};
use rayon::prelude::*;

fn graphs(ds: &LabeledDataset, n: usize) -> Vec<(PreparedGraph, usize)> {
    let cfg = GranulationConfig::default();
    ds.images()[..n]
        .par_iter()
        .zip(&ds.labels()[..n])
        .map(|(img, &l)| {
            let g = build_graph(&granulate(img, &cfg).unwrap(), img.width(), img.height(), l).unwrap();
            (PreparedGraph::new(&g), l)
        })
        .collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(2000);
    let rounds: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(20);

    let train = load_mnist(
        "data/mnist/train-images-idx3-ubyte",
        "data/mnist/train-labels-idx1-ubyte",
    )?;
    let test = load_mnist("data/mnist/t10k-images-idx3-ubyte", "data/mnist/t10k-labels-idx1-ubyte")?;
    let (train, test) = (graphs(&train, n.min(train.len())), graphs(&test, 500.min(test.len())));

    for (name, mu) in [("FedAvg", 0.0), ("FedProx", 0.01)] {
        let cfg = FederationConfig {
            rounds,
            mu,
            ..Default::default()
        };
        let model = GcnModel::new(cfg.hidden, 10);
        let out = run_federation(&model, partition(&train, cfg.num_clients, cfg.seed)?, &test, &cfg)?;
        let accs: Vec<String> = out.logs.iter().map(|l| format!("{:.3}", l.accuracy)).collect();
        let comm: f64 = out.logs.iter().map(|l| l.seconds).sum();
        println!("{name:<8} {}  (comm {:.2} ms)", accs.join(" "), comm * 1e3);
    }
    Ok(())
}
