//! Turn a granulated digit into a graph and round-trip it through JSON.
//!
//!     cargo run --example build_graph

use grbfl::data::load_mnist;
use grbfl::granulation::{granulate, GranulationConfig};
use grbfl::graph::{build_graph, deserialize_graph, serialize_graph};
use grbfl::nn::{normalized_adjacency, Classifier, GcnModel, ParamVector, PreparedGraph};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let train = load_mnist(
        "data/mnist/train-images-idx3-ubyte",
        "data/mnist/train-labels-idx1-ubyte",
    )?;
    let (img, label) = train.iter().next().ok_or("empty dataset")?;
    let rects = granulate(img, &GranulationConfig::default())?;
    let graph = build_graph(&rects, img.width(), img.height(), label)?;

    let k = graph.num_nodes();
    let degrees: Vec<usize> = (0..k)
        .map(|i| (0..k).filter(|&j| graph.has_edge(i, j)).count())
        .collect();
    println!(
        "{k} nodes, {} edges, max degree {}, isolated {}",
        graph.num_edges(),
        degrees.iter().max().unwrap_or(&0),
        degrees.iter().filter(|&&d| d == 0).count()
    );

    let a = normalized_adjacency(graph.adjacency(), k);
    println!("A_hat[0][0] = {:.4}", a[0]);

    let bytes = serialize_graph(&graph);
    assert_eq!(deserialize_graph(&bytes)?, graph);
    println!(
        "JSON: {} bytes, starts {}",
        bytes.len(),
        String::from_utf8_lossy(&bytes[..60.min(bytes.len())])
    );

    let model = GcnModel::new(64, 10);
    let params = ParamVector::glorot(model.layout().clone(), 0);
    let logits = model.logits(&params, &PreparedGraph::new(&graph))?;
    println!("untrained logits: {:.3?}", logits);
    Ok(())
}
