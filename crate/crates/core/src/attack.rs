//! Gradient-inversion attacks.
//!
//! The attacker holds the model weights, one observed per-sample gradient and
//! its label, and searches for an input whose gradient matches:
//!
//! ```text
//! L(x') = ||dF(x')/dW - g||^2
//! ```
//!
//! `dL/dx'` is computed exactly by differentiating the backward pass a second
//! time. Against the pixel MLP the search space is the image itself. Against
//! the GCN the attacker also knows the graph topology and each granule's
//! position and size, and searches only over the four value features per node;
//! the result is painted back into an image with [`render_rectangles`].

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::data::{DataError, Image};
use crate::granulation::Span;
use crate::graph::{feature, GranularGraph, NodeFeatures, NODE_FEATURES};
use crate::metrics::{mse, privacy_score_from_mse, MetricError};
use crate::nn::{
    backward_parts, forward_parts, lbfgs_minimize_projected, mlp_forward, softmax, softmax_cross_entropy, Classifier,
    GcnModel, GraphTopology, LbfgsConfig, MlpModel, ModelError, ParamVector, Termination,
};

/// Fill for pixels no rectangle covers.
pub const UNCOVERED_FILL: f64 = 0.5;

#[derive(Debug, Error)]
pub enum AttackError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("invalid attack config: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// What the attacker sees: weights, one sample's gradient, and its label.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackObservation {
    pub params: ParamVector,
    pub gradient: ParamVector,
    pub label: usize,
}

impl AttackObservation {
    pub fn new(params: ParamVector, gradient: ParamVector, label: usize) -> Result<Self, AttackError> {
        if params.layout() != gradient.layout() {
            return Err(ModelError::LayoutMismatch.into());
        }
        Ok(Self {
            params,
            gradient,
            label,
        })
    }

    /// Observe the gradient the victim would send for `(input, label)`.
    pub fn capture<M: Classifier>(
        model: &M,
        params: &ParamVector,
        input: &M::Input,
        label: usize,
    ) -> Result<Self, AttackError> {
        let (_, gradient) = model.loss_and_gradient(params, input, label)?;
        Self::new(params.clone(), gradient, label)
    }

    fn check_layout<M: Classifier>(&self, model: &M) -> Result<(), AttackError> {
        if self.params.layout() != model.layout() {
            return Err(ModelError::LayoutMismatch.into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttackInit {
    /// Independent uniform draws on `[0, 1]` from the config seed.
    Uniform,
    Constant(f64),
    /// Explicit starting point over the optimized variables.
    Values(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackConfig {
    pub iterations: usize,
    pub history: usize,
    pub initial_step: f64,
    pub seed: u64,
    pub init: AttackInit,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            iterations: 300,
            history: 10,
            initial_step: 1.0,
            seed: 0,
            init: AttackInit::Uniform,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<(), AttackError> {
        if self.iterations == 0 {
            return Err(AttackError::InvalidConfig("iterations must be >= 1".into()));
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return Err(AttackError::InvalidConfig(format!(
                "initial_step must be positive, got {}",
                self.initial_step
            )));
        }
        if let AttackInit::Constant(c) = self.init {
            if !(0.0..=1.0).contains(&c) {
                return Err(AttackError::InvalidConfig(format!("constant init {c} outside [0, 1]")));
            }
        }
        Ok(())
    }

    fn start(&self, n: usize) -> Result<Vec<f64>, AttackError> {
        Ok(match &self.init {
            AttackInit::Uniform => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect()
            }
            AttackInit::Constant(c) => vec![*c; n],
            AttackInit::Values(v) => {
                if v.len() != n {
                    return Err(AttackError::DimensionMismatch(format!(
                        "init has {} values, attack optimizes {n}",
                        v.len()
                    )));
                }
                v.clone()
            }
        })
    }

    fn lbfgs(&self) -> LbfgsConfig {
        LbfgsConfig {
            max_iters: self.iterations,
            history: self.history,
            initial_step: self.initial_step,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub image: Image,
    /// Optimized variables at the best iterate: pixels, or per-node value
    /// features `[mean, var, max, min]` for the graph attack.
    pub candidate: Vec<f64>,
    /// Gradient-match loss after each iteration.
    pub trace: Vec<f64>,
    pub loss: f64,
    pub mse: f64,
    pub s_p: f64,
    pub termination: Termination,
}

impl ReconstructionResult {
    /// `iteration,loss` rows.
    pub fn write_trace_csv(&self, out: impl Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "loss"])?;
        for (i, l) in self.trace.iter().enumerate() {
            w.write_record([(i + 1).to_string(), l.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Squared distance between two gradients and the doubled residuals.
fn residual(g: &ParamVector, observed: &ParamVector) -> (f64, Vec<f64>) {
    let r: Vec<f64> = g.values().iter().zip(observed.values()).map(|(a, b)| a - b).collect();
    let loss = r.iter().map(|v| v * v).sum();
    (loss, r.into_iter().map(|v| 2.0 * v).collect())
}

/// Pull the upstream gradient `dz_bar` through the softmax Jacobian.
fn softmax_vjp(p: &[f64], dz_bar: &[f64]) -> Vec<f64> {
    let inner: f64 = p.iter().zip(dz_bar).map(|(a, b)| a * b).sum();
    p.iter().zip(dz_bar).map(|(pi, d)| pi * (d - inner)).collect()
}

/// Gradient-match loss of a pixel candidate and its gradient over pixels.
pub fn pixel_match_loss(model: &MlpModel, obs: &AttackObservation, x: &[f64]) -> Result<(f64, Vec<f64>), AttackError> {
    obs.check_layout(model)?;
    let fwd = mlp_forward(model, x, &obs.params)?;
    let (_, dz) = softmax_cross_entropy(&fwd.logits, obs.label)?;
    let p = softmax(&fwd.logits);
    let grad = model.backward(&obs.params, x, &fwd, &dz);
    let (loss, r) = residual(&grad, &obs.gradient);

    let (n, h, c) = (model.inputs(), model.hidden(), model.num_classes());
    let (w1, w2) = (obs.params.segment(0), obs.params.segment(1));
    let (r1, r2) = r.split_at(n * h);
    let active: Vec<bool> = fwd.pre.iter().map(|&a| a > 0.0).collect();
    let da: Vec<f64> = (0..h)
        .map(|j| {
            if active[j] {
                w2[j * c..(j + 1) * c].iter().zip(&dz).map(|(w, d)| w * d).sum()
            } else {
                0.0
            }
        })
        .collect();

    // gW1 = x da^T
    let mut x_bar = vec![0.0; n];
    let mut da_bar = vec![0.0; h];
    for i in 0..n {
        let row = &r1[i * h..(i + 1) * h];
        x_bar[i] = row.iter().zip(&da).map(|(a, b)| a * b).sum();
        if x[i] != 0.0 {
            for (d, r) in da_bar.iter_mut().zip(row) {
                *d += r * x[i];
            }
        }
    }
    // da = mask * W2 dz, gW2 = h dz^T
    let mut dz_bar = vec![0.0; c];
    let mut h_bar = vec![0.0; h];
    for j in 0..h {
        let w_row = &w2[j * c..(j + 1) * c];
        let r_row = &r2[j * c..(j + 1) * c];
        for m in 0..c {
            if active[j] {
                dz_bar[m] += w_row[m] * da_bar[j];
            }
            dz_bar[m] += r_row[m] * fwd.hidden[j];
        }
        h_bar[j] = r_row.iter().zip(&dz).map(|(a, b)| a * b).sum();
    }
    let z_bar = softmax_vjp(&p, &dz_bar);
    let a_bar: Vec<f64> = (0..h)
        .map(|j| {
            if active[j] {
                h_bar[j]
                    + w2[j * c..(j + 1) * c]
                        .iter()
                        .zip(&z_bar)
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
            } else {
                0.0
            }
        })
        .collect();
    for i in 0..n {
        x_bar[i] += w1[i * h..(i + 1) * h]
            .iter()
            .zip(&a_bar)
            .map(|(a, b)| a * b)
            .sum::<f64>();
    }
    Ok((loss, x_bar))
}

/// Gradient-match loss of a row-major `k x 8` feature candidate and its
/// gradient over every feature.
pub fn graph_match_loss(
    model: &GcnModel,
    obs: &AttackObservation,
    topology: &GraphTopology,
    features: &[f64],
) -> Result<(f64, Vec<f64>), AttackError> {
    obs.check_layout(model)?;
    let fwd = forward_parts(model, topology, features, &obs.params)?;
    let (_, dz) = softmax_cross_entropy(&fwd.logits, obs.label)?;
    let p = softmax(&fwd.logits);
    let grad = backward_parts(model, topology, &obs.params, &fwd, &dz);
    let (loss, r) = residual(&grad, &obs.gradient);

    let (k, h, c, f) = (topology.num_nodes(), model.hidden(), model.num_classes(), NODE_FEATURES);
    let (w1, w2) = (obs.params.segment(0), obs.params.segment(1));
    let (r1, r2) = r.split_at(f * h);
    let s = topology.pool();
    let active: Vec<bool> = fwd.pre.iter().map(|&a| a > 0.0).collect();
    let du: Vec<f64> = (0..h)
        .map(|j| w2[j * c..(j + 1) * c].iter().zip(&dz).map(|(w, d)| w * d).sum())
        .collect();

    // gW1 = P^T dA1 with dA1[i][j] = mask * s_i du_j
    let mut p_bar = vec![0.0; k * f];
    let mut du_bar = vec![0.0; h];
    for i in 0..k {
        let prop = &fwd.propagated[i * f..(i + 1) * f];
        for j in 0..h {
            if !active[i * h + j] {
                continue;
            }
            let da1 = s[i] * du[j];
            let mut da1_bar = 0.0;
            for a in 0..f {
                let r = r1[a * h + j];
                p_bar[i * f + a] += da1 * r;
                da1_bar += prop[a] * r;
            }
            du_bar[j] += s[i] * da1_bar;
        }
    }
    // du = W2 dz, gW2 = u dz^T
    let mut dz_bar = vec![0.0; c];
    let mut u_bar = vec![0.0; h];
    for j in 0..h {
        let w_row = &w2[j * c..(j + 1) * c];
        let r_row = &r2[j * c..(j + 1) * c];
        for m in 0..c {
            dz_bar[m] += w_row[m] * du_bar[j] + r_row[m] * fwd.pooled[j];
        }
        u_bar[j] = r_row.iter().zip(&dz).map(|(a, b)| a * b).sum();
    }
    let z_bar = softmax_vjp(&p, &dz_bar);
    for j in 0..h {
        u_bar[j] += w2[j * c..(j + 1) * c]
            .iter()
            .zip(&z_bar)
            .map(|(a, b)| a * b)
            .sum::<f64>();
    }
    // u = s^T ReLU(P W1)
    for i in 0..k {
        for j in 0..h {
            if active[i * h + j] {
                let a1_bar = s[i] * u_bar[j];
                for a in 0..f {
                    p_bar[i * f + a] += a1_bar * w1[a * h + j];
                }
            }
        }
    }
    // P = A_hat X with A_hat symmetric
    Ok((loss, topology.propagate(&p_bar, f)))
}

/// Paint each pixel with the mean `v_m` of the rectangles covering it.
pub fn render_rectangles(features: &[NodeFeatures], width: usize, height: usize) -> Result<Image, AttackError> {
    let mut sum = vec![0.0; width * height];
    let mut count = vec![0u32; width * height];
    let denorm = |v: f64, scale: usize| (v * scale as f64).round().max(0.0) as usize;
    for node in features {
        let cx = denorm(node[feature::CENTER_X], width).min(width - 1);
        let cy = denorm(node[feature::CENTER_Y], height).min(height - 1);
        let rx = denorm(node[feature::RADIUS_X], width);
        let ry = denorm(node[feature::RADIUS_Y], height);
        let span = Span::clipped(width, height, cx, cy, rx, ry);
        for y in span.y0..=span.y1 {
            for x in span.x0..=span.x1 {
                sum[y * width + x] += node[feature::MEAN];
                count[y * width + x] += 1;
            }
        }
    }
    let pixels = sum
        .into_iter()
        .zip(count)
        .map(|(s, n)| {
            if n == 0 {
                UNCOVERED_FILL
            } else {
                (s / n as f64).clamp(0.0, 1.0)
            }
        })
        .collect();
    Ok(Image::new(width, height, pixels)?)
}

fn clamp_unit(x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
}

/// Invert an MLP gradient over the pixels of a `truth`-sized image, clamped
/// to `[0, 1]`. `truth` is used for its shape and for scoring only.
pub fn reconstruct_pixels(
    model: &MlpModel,
    obs: &AttackObservation,
    truth: &Image,
    config: &AttackConfig,
) -> Result<ReconstructionResult, AttackError> {
    config.validate()?;
    if truth.len() != model.inputs() {
        return Err(AttackError::DimensionMismatch(format!(
            "model takes {} pixels, image has {}",
            model.inputs(),
            truth.len()
        )));
    }
    let mut x0 = config.start(truth.len())?;
    clamp_unit(&mut x0);
    pixel_match_loss(model, obs, &x0)?;
    let out = lbfgs_minimize_projected(
        |x| pixel_match_loss(model, obs, x).unwrap_or_else(|_| (f64::NAN, vec![f64::NAN; x.len()])),
        &x0,
        &config.lbfgs(),
        clamp_unit,
    );
    let image = Image::new(truth.width(), truth.height(), out.x.clone())?;
    let err = mse(truth, &image)?;
    Ok(ReconstructionResult {
        image,
        candidate: out.x,
        trace: out.trace,
        loss: out.value,
        mse: err,
        s_p: privacy_score_from_mse(err),
        termination: out.termination,
    })
}

fn with_values(geometry: &[NodeFeatures], values: &[f64]) -> Vec<f64> {
    let mut full = Vec::with_capacity(geometry.len() * NODE_FEATURES);
    for (node, v) in geometry.iter().zip(values.chunks_exact(feature::VALUES.len())) {
        let mut row = *node;
        for (&col, &value) in feature::VALUES.iter().zip(v) {
            row[col] = value;
        }
        full.extend_from_slice(&row);
    }
    full
}

/// Invert a GCN gradient over the value features of `graph`'s nodes. Topology,
/// centers and radii are taken from `graph` as attacker knowledge; its value
/// features are never read. `truth` is used for scoring only.
pub fn reconstruct_graph_features(
    model: &GcnModel,
    obs: &AttackObservation,
    graph: &GranularGraph,
    truth: &Image,
    config: &AttackConfig,
) -> Result<ReconstructionResult, AttackError> {
    config.validate()?;
    let (w, h) = (graph.source_width(), graph.source_height());
    if (truth.width(), truth.height()) != (w, h) {
        return Err(AttackError::DimensionMismatch(format!(
            "graph source is {w}x{h}, image is {}x{}",
            truth.width(),
            truth.height()
        )));
    }
    let topology = GraphTopology::from_adjacency(graph.adjacency(), graph.num_nodes());
    let geometry = graph.node_features();
    let per_node = feature::VALUES.len();
    let objective = |v: &[f64]| -> Result<(f64, Vec<f64>), AttackError> {
        let (loss, full) = graph_match_loss(model, obs, &topology, &with_values(geometry, v))?;
        let grad = full
            .chunks_exact(NODE_FEATURES)
            .flat_map(|row| feature::VALUES.map(|col| row[col]))
            .collect();
        Ok((loss, grad))
    };
    let mut v0 = config.start(graph.num_nodes() * per_node)?;
    clamp_unit(&mut v0);
    objective(&v0)?;
    let out = lbfgs_minimize_projected(
        |v| objective(v).unwrap_or_else(|_| (f64::NAN, vec![f64::NAN; v.len()])),
        &v0,
        &config.lbfgs(),
        clamp_unit,
    );
    let rows: Vec<NodeFeatures> = with_values(geometry, &out.x)
        .chunks_exact(NODE_FEATURES)
        .map(|r| r.try_into().expect("row has NODE_FEATURES values"))
        .collect();
    let image = render_rectangles(&rows, w, h)?;
    let err = mse(truth, &image)?;
    Ok(ReconstructionResult {
        image,
        candidate: out.x,
        trace: out.trace,
        loss: out.value,
        mse: err,
        s_p: privacy_score_from_mse(err),
        termination: out.termination,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::granulation::{granulate, GranulationConfig};
    use crate::graph::build_graph;
    use crate::nn::PreparedGraph;

    fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], eps: f64) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let mut hi = x.to_vec();
                let mut lo = x.to_vec();
                hi[i] += eps;
                lo[i] -= eps;
                (f(&hi) - f(&lo)) / (2.0 * eps)
            })
            .collect()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let scale: f64 = a
            .iter()
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
            .max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
        diff / scale.max(1e-12)
    }

    fn toy_image(seed: u64, w: usize, h: usize) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::new(w, h, (0..w * h).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap()
    }

    fn toy_graph() -> GranularGraph {
        GranularGraph::from_parts(
            vec![
                [0.25, 0.25, 0.2, 0.01, 0.25, 0.25, 0.3, 0.1],
                [0.75, 0.25, 0.7, 0.02, 0.25, 0.25, 0.9, 0.5],
                [0.5, 0.75, 0.4, 0.0, 0.5, 0.25, 0.4, 0.4],
            ],
            &[(0, 1), (0, 2), (1, 2)],
            1,
            4,
            4,
        )
        .unwrap()
    }

    #[test]
    fn pixel_loss_vanishes_at_truth_and_matches_fd() {
        let model = MlpModel::new(16, 6, 3);
        let params = ParamVector::glorot(model.layout().clone(), 3);
        let truth = toy_image(1, 4, 4);
        let obs = AttackObservation::capture(&model, &params, &truth, 2).unwrap();
        let (loss, grad) = pixel_match_loss(&model, &obs, truth.pixels()).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));

        let cand = toy_image(2, 4, 4);
        let (_, grad) = pixel_match_loss(&model, &obs, cand.pixels()).unwrap();
        let fd = central_difference(|x| pixel_match_loss(&model, &obs, x).unwrap().0, cand.pixels(), 1e-6);
        assert!(rel_err(&grad, &fd) < 1e-5, "rel err {}", rel_err(&grad, &fd));
    }

    #[test]
    fn zero_observation_gives_gradient_norm() {
        let model = MlpModel::new(16, 6, 3);
        let params = ParamVector::glorot(model.layout().clone(), 5);
        let x = toy_image(4, 4, 4);
        let obs = AttackObservation::new(params.clone(), ParamVector::zeros(model.layout().clone()), 0).unwrap();
        let (_, g) = model.loss_and_gradient(&params, &x, 0).unwrap();
        let (loss, _) = pixel_match_loss(&model, &obs, x.pixels()).unwrap();
        assert!((loss - g.norm().powi(2)).abs() < 1e-12 * loss.max(1.0));
    }

    #[test]
    fn graph_loss_vanishes_at_truth_and_matches_fd() {
        let model = GcnModel::new(5, 3);
        let params = ParamVector::glorot(model.layout().clone(), 9);
        let graph = toy_graph();
        let prepared = PreparedGraph::new(&graph);
        let obs = AttackObservation::capture(&model, &params, &prepared, 1).unwrap();
        let (loss, _) = graph_match_loss(&model, &obs, &prepared.topology, &prepared.features).unwrap();
        assert_eq!(loss, 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cand: Vec<f64> = (0..prepared.features.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
        let (_, grad) = graph_match_loss(&model, &obs, &prepared.topology, &cand).unwrap();
        let fd = central_difference(
            |x| graph_match_loss(&model, &obs, &prepared.topology, x).unwrap().0,
            &cand,
            1e-6,
        );
        assert!(rel_err(&grad, &fd) < 1e-5, "rel err {}", rel_err(&grad, &fd));
    }

    #[test]
    fn observation_layout_is_checked() {
        let a = ParamVector::zeros(MlpModel::new(4, 2, 2).layout().clone());
        let b = ParamVector::zeros(MlpModel::new(4, 3, 2).layout().clone());
        assert!(AttackObservation::new(a.clone(), b, 0).is_err());
        let obs = AttackObservation::new(a.clone(), a, 0).unwrap();
        assert!(pixel_match_loss(&MlpModel::new(4, 3, 2), &obs, &[0.0; 4]).is_err());
    }

    #[test]
    fn render_cases() {
        let full = [[0.5, 0.5, 0.3, 0.0, 0.5, 0.5, 0.3, 0.3]];
        let img = render_rectangles(&full, 4, 4).unwrap();
        assert!(img.pixels().iter().all(|&p| p == 0.3));

        // x spans 0..=2 and 1..=3, overlapping on columns 1 and 2
        let two = [
            [0.25, 0.0, 0.0, 0.0, 0.25, 0.0, 0.0, 0.0],
            [0.5, 0.0, 1.0, 0.0, 0.25, 0.0, 1.0, 1.0],
        ];
        let img = render_rectangles(&two, 4, 1).unwrap();
        assert_eq!(img.pixels(), &[0.0, 0.5, 0.5, 1.0]);

        let tiny = [[0.0, 0.0, 0.9, 0.0, 0.0, 0.0, 0.9, 0.9]];
        let img = render_rectangles(&tiny, 2, 2).unwrap();
        assert_eq!(img.pixels(), &[0.9, UNCOVERED_FILL, UNCOVERED_FILL, UNCOVERED_FILL]);
    }

    #[test]
    fn render_of_uniform_granulation_is_exact() {
        let img = Image::filled(9, 7, 0.42).unwrap();
        let rects = granulate(&img, &GranulationConfig::default()).unwrap();
        let graph = build_graph(&rects, 9, 7, 0).unwrap();
        assert_eq!(render_rectangles(graph.node_features(), 9, 7).unwrap(), img);
    }

    #[test]
    fn true_values_start_at_zero_loss() {
        let model = GcnModel::new(5, 3);
        let params = ParamVector::glorot(model.layout().clone(), 2);
        let graph = toy_graph();
        let obs = AttackObservation::capture(&model, &params, &PreparedGraph::new(&graph), 1).unwrap();
        let truth_values: Vec<f64> = graph
            .node_features()
            .iter()
            .flat_map(|r| feature::VALUES.map(|c| r[c]))
            .collect();
        let cfg = AttackConfig {
            init: AttackInit::Values(truth_values.clone()),
            ..Default::default()
        };
        let truth = toy_image(0, 4, 4);
        let out = reconstruct_graph_features(&model, &obs, &graph, &truth, &cfg).unwrap();
        assert_eq!(out.loss, 0.0);
        assert_eq!(out.candidate, truth_values);
        assert_eq!(out.image, render_rectangles(graph.node_features(), 4, 4).unwrap());
    }

    #[test]
    fn single_node_renders_constant() {
        let model = GcnModel::new(4, 2);
        let params = ParamVector::glorot(model.layout().clone(), 1);
        let graph = GranularGraph::from_parts(vec![[0.0, 0.0, 0.6, 0.0, 0.75, 0.75, 0.6, 0.6]], &[], 0, 4, 4).unwrap();
        let obs = AttackObservation::capture(&model, &params, &PreparedGraph::new(&graph), 0).unwrap();
        let cfg = AttackConfig {
            iterations: 50,
            init: AttackInit::Constant(0.5),
            ..Default::default()
        };
        let out = reconstruct_graph_features(&model, &obs, &graph, &Image::filled(4, 4, 0.6).unwrap(), &cfg).unwrap();
        assert_eq!(out.candidate.len(), 4);
        let first = out.image.pixels()[0];
        assert!(out.image.pixels().iter().all(|&p| p == first));
        assert_eq!(first, out.candidate[0].clamp(0.0, 1.0));
    }

    #[test]
    fn pixel_attack_recovers_toy_image() {
        let model = MlpModel::new(64, 16, 10);
        let params = ParamVector::glorot(model.layout().clone(), 11);
        let truth = toy_image(12, 8, 8);
        let obs = AttackObservation::capture(&model, &params, &truth, 3).unwrap();
        let out = reconstruct_pixels(&model, &obs, &truth, &AttackConfig::default()).unwrap();
        assert!(out.loss < 1e-4, "loss {}", out.loss);
        assert!(out.mse < 0.05, "mse {}", out.mse);
        assert!(out.trace.len() <= 300);
        assert!(out.trace.windows(2).all(|w| w[1] <= w[0]));
        let again = reconstruct_pixels(&model, &obs, &truth, &AttackConfig::default()).unwrap();
        assert_eq!(again.candidate, out.candidate);
    }

    #[test]
    fn one_iteration_keeps_the_better_point() {
        let model = MlpModel::new(16, 6, 3);
        let params = ParamVector::glorot(model.layout().clone(), 3);
        let truth = toy_image(1, 4, 4);
        let obs = AttackObservation::capture(&model, &params, &truth, 2).unwrap();
        let cfg = AttackConfig {
            iterations: 1,
            ..Default::default()
        };
        let start = cfg.start(16).unwrap();
        let (init_loss, _) = pixel_match_loss(&model, &obs, &start).unwrap();
        let out = reconstruct_pixels(&model, &obs, &truth, &cfg).unwrap();
        assert!(out.trace.len() <= 1);
        assert!(out.loss <= init_loss);
        let best = out.trace.first().copied().unwrap_or(init_loss).min(init_loss);
        assert_eq!(out.loss, best);
    }

    #[test]
    fn config_validation() {
        let zero = AttackConfig {
            iterations: 0,
            ..Default::default()
        };
        assert!(zero.validate().is_err());
        let bad_init = AttackConfig {
            init: AttackInit::Constant(2.0),
            ..Default::default()
        };
        assert!(bad_init.validate().is_err());
    }
}
