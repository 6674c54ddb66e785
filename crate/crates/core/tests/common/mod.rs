#![allow(dead_code)]

use std::path::PathBuf;

use grbfl::data::{load_mnist, Image, LabeledDataset};
use grbfl::graph::{GranularGraph, NodeFeatures};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist")
}

pub fn mnist_train() -> LabeledDataset {
    let d = data_dir();
    load_mnist(d.join("train-images-idx3-ubyte"), d.join("train-labels-idx1-ubyte")).expect("bundled MNIST subset")
}

pub fn mnist_test() -> LabeledDataset {
    let d = data_dir();
    load_mnist(d.join("t10k-images-idx3-ubyte"), d.join("t10k-labels-idx1-ubyte")).expect("bundled MNIST subset")
}

pub fn random_image(rng: &mut impl Rng, w: usize, h: usize) -> Image {
    Image::new(w, h, (0..w * h).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap()
}

/// Images made of a few flat blocks with light noise, so rectangles have
/// room to grow.
pub fn blocky_image(rng: &mut impl Rng, w: usize, h: usize, noise: f64) -> Image {
    let levels: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..1.0)).collect();
    let (sx, sy) = (rng.gen_range(1..w), rng.gen_range(1..h));
    let px = (0..w * h)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            let base = levels[usize::from(x >= sx) + 2 * usize::from(y >= sy)];
            (base + rng.gen_range(-noise..=noise)).clamp(0.0, 1.0)
        })
        .collect();
    Image::new(w, h, px).unwrap()
}

/// Random graph with features in `[0, 1]` and edge probability `p`.
pub fn random_graph(seed: u64, k: usize, p: f64, label: usize) -> GranularGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features: Vec<NodeFeatures> = (0..k)
        .map(|_| std::array::from_fn(|_| rng.gen_range(0.0..1.0)))
        .collect();
    let mut edges = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            if rng.gen_bool(p) {
                edges.push((i, j));
            }
        }
    }
    GranularGraph::from_parts(features, &edges, label, 16, 16).unwrap()
}

pub fn central_difference(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut x = x.to_vec();
    (0..x.len())
        .map(|i| {
            let v = x[i];
            x[i] = v + h;
            let up = f(&x);
            x[i] = v - h;
            let down = f(&x);
            x[i] = v;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `||a - b|| / max(||a||, ||b||)`.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(a).max(norm(b)).max(1e-300)
}
