//! Granular-rectangle graphs: one node per rectangle, an edge between every
//! pair of rectangles sharing at least one pixel.
//!
//! On-disk format (JSON, one graph per object; shards are JSON arrays):
//!
//! ```text
//! {"width": 28, "height": 28, "label": 7,
//!  "nodes": [[c_x, c_y, v_m, v_var, r_x, r_y, v_max, v_min], ...],
//!  "edges": [[i, j], ...]}            // i < j, sorted, no duplicates
//! ```
//!
//! Node coordinates and radii are divided by the image width (x) or height (y).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::granulation::GranularRectangle;

pub const NODE_FEATURES: usize = 8;

/// Column indices into a node feature row.
pub mod feature {
    pub const CENTER_X: usize = 0;
    pub const CENTER_Y: usize = 1;
    pub const MEAN: usize = 2;
    pub const VARIANCE: usize = 3;
    pub const RADIUS_X: usize = 4;
    pub const RADIUS_Y: usize = 5;
    pub const MAX: usize = 6;
    pub const MIN: usize = 7;

    /// Position and size columns.
    pub const GEOMETRY: [usize; 4] = [CENTER_X, CENTER_Y, RADIUS_X, RADIUS_Y];
    /// Pixel-value columns.
    pub const VALUES: [usize; 4] = [MEAN, VARIANCE, MAX, MIN];
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("cannot build a graph from zero rectangles")]
    Empty,
    #[error("graph schema error: {0}")]
    Schema(String),
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("edge ({0}, {1}) references a node outside 0..{2}")]
    IndexOutOfRange(usize, usize, usize),
    #[error("edge ({0}, {1}) is not in canonical order (i < j, sorted, unique)")]
    NonCanonicalEdge(usize, usize),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type NodeFeatures = [f64; NODE_FEATURES];

#[derive(Debug, Clone, PartialEq)]
pub struct GranularGraph {
    node_features: Vec<NodeFeatures>,
    adjacency: Vec<bool>,
    label: usize,
    source_width: usize,
    source_height: usize,
}

/// Edge test on integer centers and clipped radii; equivalent to the two
/// clipped rectangles sharing a pixel.
#[inline]
pub fn rectangles_adjacent(a: &GranularRectangle, b: &GranularRectangle) -> bool {
    let dx = (a.center_x as i64 - b.center_x as i64).abs();
    let dy = (a.center_y as i64 - b.center_y as i64).abs();
    dx - 1 < (a.r_x + b.r_x) as i64 && dy - 1 < (a.r_y + b.r_y) as i64
}

pub fn node_features(rect: &GranularRectangle, width: usize, height: usize) -> NodeFeatures {
    let (w, h) = (width as f64, height as f64);
    [
        rect.center_x as f64 / w,
        rect.center_y as f64 / h,
        rect.mean,
        rect.variance,
        rect.r_x as f64 / w,
        rect.r_y as f64 / h,
        rect.max_val,
        rect.min_val,
    ]
}

pub fn build_graph(
    rects: &[GranularRectangle],
    width: usize,
    height: usize,
    label: usize,
) -> Result<GranularGraph, GraphError> {
    if rects.is_empty() {
        return Err(GraphError::Empty);
    }
    let k = rects.len();
    let boxes: Vec<[i64; 4]> = rects
        .iter()
        .map(|r| [r.center_x as i64, r.center_y as i64, r.r_x as i64, r.r_y as i64])
        .collect();
    let mut adjacency = vec![false; k * k];
    for (i, a) in boxes.iter().enumerate() {
        for (j, b) in boxes.iter().enumerate().skip(i + 1) {
            if (a[0] - b[0]).abs() - 1 < a[2] + b[2] && (a[1] - b[1]).abs() - 1 < a[3] + b[3] {
                adjacency[i * k + j] = true;
                adjacency[j * k + i] = true;
            }
        }
    }
    Ok(GranularGraph {
        node_features: rects.iter().map(|r| node_features(r, width, height)).collect(),
        adjacency,
        label,
        source_width: width,
        source_height: height,
    })
}

impl GranularGraph {
    /// Builds a graph from explicit parts, checking symmetry and the diagonal.
    pub fn from_parts(
        node_features: Vec<NodeFeatures>,
        edges: &[(usize, usize)],
        label: usize,
        source_width: usize,
        source_height: usize,
    ) -> Result<Self, GraphError> {
        let k = node_features.len();
        if k == 0 {
            return Err(GraphError::Empty);
        }
        if let Some(bad) = node_features.iter().flatten().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(GraphError::Schema(format!("node feature {bad} outside [0, 1]")));
        }
        let mut adjacency = vec![false; k * k];
        let mut prev: Option<(usize, usize)> = None;
        for &(i, j) in edges {
            if i >= k || j >= k {
                return Err(GraphError::IndexOutOfRange(i, j, k));
            }
            if i == j {
                return Err(GraphError::SelfLoop(i));
            }
            if i > j || prev.is_some_and(|p| p >= (i, j)) {
                return Err(GraphError::NonCanonicalEdge(i, j));
            }
            prev = Some((i, j));
            adjacency[i * k + j] = true;
            adjacency[j * k + i] = true;
        }
        Ok(Self {
            node_features,
            adjacency,
            label,
            source_width,
            source_height,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.node_features.len()
    }

    pub fn node_features(&self) -> &[NodeFeatures] {
        &self.node_features
    }

    /// Row-major `k x k` adjacency.
    pub fn adjacency(&self) -> &[bool] {
        &self.adjacency
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.num_nodes() + j]
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn source_width(&self) -> usize {
        self.source_width
    }

    pub fn source_height(&self) -> usize {
        self.source_height
    }

    /// Sorted `(i, j)` pairs with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let k = self.num_nodes();
        (0..k)
            .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
            .filter(|&(i, j)| self.adjacency[i * k + j])
            .collect()
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.iter().filter(|&&a| a).count() / 2
    }

    /// Same topology and metadata with replaced node features.
    pub fn with_features(&self, node_features: Vec<NodeFeatures>) -> Self {
        assert_eq!(
            node_features.len(),
            self.num_nodes(),
            "feature row count must match node count"
        );
        Self {
            node_features,
            ..self.clone()
        }
    }

    /// Graph relabeled by `perm`: new node `n` is old node `perm[n]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let k = self.num_nodes();
        assert_eq!(perm.len(), k);
        let mut adjacency = vec![false; k * k];
        for a in 0..k {
            for b in 0..k {
                adjacency[a * k + b] = self.adjacency[perm[a] * k + perm[b]];
            }
        }
        Self {
            node_features: perm.iter().map(|&p| self.node_features[p]).collect(),
            adjacency,
            ..self.clone()
        }
    }

    fn to_record(&self) -> GraphRecord {
        GraphRecord {
            width: self.source_width,
            height: self.source_height,
            label: self.label,
            nodes: self.node_features.iter().map(|r| r.to_vec()).collect(),
            edges: self.edges().into_iter().map(|(i, j)| [i, j]).collect(),
        }
    }

    fn from_record(rec: GraphRecord) -> Result<Self, GraphError> {
        let features = rec
            .nodes
            .into_iter()
            .enumerate()
            .map(|(n, row)| {
                NodeFeatures::try_from(row.as_slice()).map_err(|_| {
                    GraphError::Schema(format!("node {n} has {} features, expected {NODE_FEATURES}", row.len()))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let edges: Vec<(usize, usize)> = rec.edges.into_iter().map(|[i, j]| (i, j)).collect();
        Self::from_parts(features, &edges, rec.label, rec.width, rec.height)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphRecord {
    width: usize,
    height: usize,
    label: usize,
    nodes: Vec<Vec<f64>>,
    edges: Vec<[usize; 2]>,
}

pub fn serialize_graph(graph: &GranularGraph) -> Vec<u8> {
    serde_json::to_vec(&graph.to_record()).expect("graph records always serialize")
}

pub fn deserialize_graph(bytes: &[u8]) -> Result<GranularGraph, GraphError> {
    GranularGraph::from_record(serde_json::from_slice(bytes)?)
}

/// A JSON array of graphs.
pub fn serialize_graphs(graphs: &[GranularGraph]) -> Vec<u8> {
    let records: Vec<GraphRecord> = graphs.iter().map(GranularGraph::to_record).collect();
    serde_json::to_vec(&records).expect("graph records always serialize")
}

pub fn deserialize_graphs(bytes: &[u8]) -> Result<Vec<GranularGraph>, GraphError> {
    let records: Vec<GraphRecord> = serde_json::from_slice(bytes)?;
    records.into_iter().map(GranularGraph::from_record).collect()
}
