use super::{relu, softmax_cross_entropy, Classifier, ModelError, ParamLayout, ParamVector, Segment};
use crate::graph::{GranularGraph, NODE_FEATURES};

/// Dense `D^{-1/2} (A + I) D^{-1/2}` for a symmetric zero-diagonal adjacency.
pub fn normalized_adjacency(adjacency: &[bool], k: usize) -> Vec<f64> {
    assert_eq!(adjacency.len(), k * k, "adjacency must be k x k");
    let deg: Vec<f64> = (0..k)
        .map(|i| 1.0 + adjacency[i * k..(i + 1) * k].iter().filter(|&&a| a).count() as f64)
        .collect();
    let mut out = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            if i == j || adjacency[i * k + j] {
                out[i * k + j] = 1.0 / (deg[i] * deg[j]).sqrt();
            }
        }
    }
    out
}

/// Sparse normalized adjacency plus the mean-pool weights
/// `pool[j] = (1/k) * sum_i A_hat[i][j]`, so that mean-pooling `A_hat * H`
/// over nodes equals `pool^T H`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphTopology {
    k: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    weights: Vec<f64>,
    pool: Vec<f64>,
}

impl GraphTopology {
    pub fn from_adjacency(adjacency: &[bool], k: usize) -> Self {
        assert_eq!(adjacency.len(), k * k, "adjacency must be k x k");
        let deg: Vec<f64> = (0..k)
            .map(|i| 1.0 + adjacency[i * k..(i + 1) * k].iter().filter(|&&a| a).count() as f64)
            .collect();
        let mut row_ptr = Vec::with_capacity(k + 1);
        let mut cols = Vec::new();
        let mut weights = Vec::new();
        let mut pool = vec![0.0; k];
        row_ptr.push(0);
        for i in 0..k {
            for j in 0..k {
                if i == j || adjacency[i * k + j] {
                    let w = 1.0 / (deg[i] * deg[j]).sqrt();
                    cols.push(j);
                    weights.push(w);
                    pool[j] += w;
                }
            }
            row_ptr.push(cols.len());
        }
        pool.iter_mut().for_each(|p| *p /= k as f64);
        Self {
            k,
            row_ptr,
            cols,
            weights,
            pool,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.k
    }

    pub fn pool(&self) -> &[f64] {
        &self.pool
    }

    /// `A_hat * m` for a row-major `k x width` matrix.
    pub(crate) fn propagate(&self, m: &[f64], width: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.k * width];
        for i in 0..self.k {
            let dst = &mut out[i * width..(i + 1) * width];
            for e in self.row_ptr[i]..self.row_ptr[i + 1] {
                let (j, w) = (self.cols[e], self.weights[e]);
                for (d, s) in dst.iter_mut().zip(&m[j * width..(j + 1) * width]) {
                    *d += w * s;
                }
            }
        }
        out
    }
}

/// A graph ready for the GCN: topology preprocessed once, features flattened.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedGraph {
    pub topology: GraphTopology,
    /// Row-major `k x 8`.
    pub features: Vec<f64>,
}

impl PreparedGraph {
    pub fn new(graph: &GranularGraph) -> Self {
        Self {
            topology: GraphTopology::from_adjacency(graph.adjacency(), graph.num_nodes()),
            features: graph.node_features().iter().flatten().copied().collect(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.topology.k
    }
}

impl From<&GranularGraph> for PreparedGraph {
    fn from(g: &GranularGraph) -> Self {
        Self::new(g)
    }
}

/// Two-layer GCN without biases: `W1: 8 x h`, `W2: h x C`, mean-pool readout.
#[derive(Debug, Clone)]
pub struct GcnModel {
    hidden: usize,
    classes: usize,
    layout: ParamLayout,
}

impl GcnModel {
    pub fn new(hidden: usize, classes: usize) -> Self {
        Self {
            hidden,
            classes,
            layout: ParamLayout::new(vec![
                Segment::new("gcn.w1", NODE_FEATURES, hidden),
                Segment::new("gcn.w2", hidden, classes),
            ]),
        }
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    fn check(&self, params: &ParamVector) -> Result<(), ModelError> {
        if params.layout() != &self.layout {
            return Err(ModelError::DimensionMismatch(
                "parameters do not match the GCN layout".into(),
            ));
        }
        Ok(())
    }
}

/// Cached activations of a GCN forward pass.
#[derive(Debug, Clone)]
pub struct GcnForward {
    /// `A_hat X`, `k x 8`.
    pub propagated: Vec<f64>,
    /// `A_hat X W1`, `k x h`.
    pub pre: Vec<f64>,
    /// `ReLU(pre)`.
    pub hidden: Vec<f64>,
    /// Mean-pooled `A_hat H1`, length `h`.
    pub pooled: Vec<f64>,
    pub logits: Vec<f64>,
}

/// `logits = mean_nodes(A_hat ReLU(A_hat X W1) W2)`.
pub fn gcn_forward(model: &GcnModel, graph: &PreparedGraph, params: &ParamVector) -> Result<GcnForward, ModelError> {
    model.check(params)?;
    forward_parts(model, &graph.topology, &graph.features, params)
}

pub(crate) fn forward_parts(
    model: &GcnModel,
    topology: &GraphTopology,
    features: &[f64],
    params: &ParamVector,
) -> Result<GcnForward, ModelError> {
    let k = topology.k;
    if features.len() != k * NODE_FEATURES {
        return Err(ModelError::DimensionMismatch(format!(
            "expected {} feature values for {k} nodes, got {}",
            k * NODE_FEATURES,
            features.len()
        )));
    }
    let (h, c) = (model.hidden, model.classes);
    let w1 = params.segment(0);
    let w2 = params.segment(1);
    let propagated = topology.propagate(features, NODE_FEATURES);
    let mut pre = vec![0.0; k * h];
    for i in 0..k {
        let row = &mut pre[i * h..(i + 1) * h];
        for a in 0..NODE_FEATURES {
            let p = propagated[i * NODE_FEATURES + a];
            if p != 0.0 {
                for (r, w) in row.iter_mut().zip(&w1[a * h..(a + 1) * h]) {
                    *r += p * w;
                }
            }
        }
    }
    let hidden: Vec<f64> = pre.iter().map(|&v| relu(v)).collect();
    let mut pooled = vec![0.0; h];
    for i in 0..k {
        let s = topology.pool[i];
        for (p, v) in pooled.iter_mut().zip(&hidden[i * h..(i + 1) * h]) {
            *p += s * v;
        }
    }
    let mut logits = vec![0.0; c];
    for j in 0..h {
        let u = pooled[j];
        for (z, w) in logits.iter_mut().zip(&w2[j * c..(j + 1) * c]) {
            *z += u * w;
        }
    }
    Ok(GcnForward {
        propagated,
        pre,
        hidden,
        pooled,
        logits,
    })
}

/// Reverse-mode gradients for a forward cache and `dlogits`.
pub(crate) fn backward_parts(
    model: &GcnModel,
    topology: &GraphTopology,
    params: &ParamVector,
    fwd: &GcnForward,
    dlogits: &[f64],
) -> ParamVector {
    let (k, h, c) = (topology.k, model.hidden, model.classes);
    let w2 = params.segment(1);
    let mut grad = ParamVector::zeros(model.layout.clone());
    {
        let g2 = grad.segment_mut(1);
        for j in 0..h {
            for m in 0..c {
                g2[j * c + m] = fwd.pooled[j] * dlogits[m];
            }
        }
    }
    let dpooled: Vec<f64> = (0..h)
        .map(|j| w2[j * c..(j + 1) * c].iter().zip(dlogits).map(|(w, d)| w * d).sum())
        .collect();
    let g1 = grad.segment_mut(0);
    for i in 0..k {
        let s = topology.pool[i];
        for j in 0..h {
            if fwd.pre[i * h + j] > 0.0 {
                let dpre = s * dpooled[j];
                for a in 0..NODE_FEATURES {
                    g1[a * h + j] += fwd.propagated[i * NODE_FEATURES + a] * dpre;
                }
            }
        }
    }
    grad
}

impl Classifier for GcnModel {
    type Input = PreparedGraph;

    fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    fn num_classes(&self) -> usize {
        self.classes
    }

    fn logits(&self, params: &ParamVector, input: &PreparedGraph) -> Result<Vec<f64>, ModelError> {
        Ok(gcn_forward(self, input, params)?.logits)
    }

    fn loss_and_gradient(
        &self,
        params: &ParamVector,
        input: &PreparedGraph,
        label: usize,
    ) -> Result<(f64, ParamVector), ModelError> {
        let fwd = gcn_forward(self, input, params)?;
        let (loss, dlogits) = softmax_cross_entropy(&fwd.logits, label)?;
        Ok((loss, backward_parts(self, &input.topology, params, &fwd, &dlogits)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GranularGraph;

    #[test]
    fn normalized_adjacency_small_cases() {
        assert_eq!(normalized_adjacency(&[false], 1), vec![1.0]);
        let two = normalized_adjacency(&[false, true, true, false], 2);
        for v in two {
            assert!((v - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_first_layer_gives_uniform_loss() {
        let g = GranularGraph::from_parts(vec![[0.3; 8], [0.6; 8]], &[(0, 1)], 2, 4, 4).unwrap();
        let model = GcnModel::new(5, 10);
        let params = ParamVector::glorot(model.layout().clone(), 0);
        let mut zeroed = params.clone();
        zeroed.segment_mut(0).fill(0.0);
        let prepared = PreparedGraph::new(&g);
        let logits = model.logits(&zeroed, &prepared).unwrap();
        assert!(logits.iter().all(|&z| z == 0.0));
        let (loss, _) = model.loss_and_gradient(&zeroed, &prepared, 2).unwrap();
        assert!((loss - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn single_node_graph_is_a_plain_mlp() {
        let x = [0.1, 0.9, 0.4, 0.02, 0.3, 0.2, 0.8, 0.05];
        let g = GranularGraph::from_parts(vec![x], &[], 0, 4, 4).unwrap();
        let model = GcnModel::new(6, 3);
        let params = ParamVector::glorot(model.layout().clone(), 4);
        let logits = model.logits(&params, &PreparedGraph::new(&g)).unwrap();
        let (w1, w2) = (params.segment(0), params.segment(1));
        for (m, &z) in logits.iter().enumerate() {
            let expected: f64 = (0..6)
                .map(|j| relu((0..8).map(|a| x[a] * w1[a * 6 + j]).sum::<f64>()) * w2[j * 3 + m])
                .sum();
            assert!((z - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn dead_unit_has_zero_first_layer_column() {
        let g = GranularGraph::from_parts(vec![[0.5; 8], [0.2; 8], [0.7; 8]], &[(0, 1), (1, 2)], 1, 4, 4).unwrap();
        let model = GcnModel::new(4, 3);
        let mut params = ParamVector::glorot(model.layout().clone(), 2);
        // nonnegative features and a nonpositive column keep unit 2 dead
        for a in 0..8 {
            params.segment_mut(0)[a * 4 + 2] = -0.3;
        }
        let (_, grad) = model.loss_and_gradient(&params, &PreparedGraph::new(&g), 1).unwrap();
        for a in 0..8 {
            assert_eq!(grad.segment(0)[a * 4 + 2], 0.0);
        }
    }

    #[test]
    fn rejects_foreign_params() {
        let g = GranularGraph::from_parts(vec![[0.5; 8]], &[], 0, 4, 4).unwrap();
        let model = GcnModel::new(4, 3);
        let other = ParamVector::zeros(GcnModel::new(5, 3).layout().clone());
        assert!(model.logits(&other, &PreparedGraph::new(&g)).is_err());
    }
}
