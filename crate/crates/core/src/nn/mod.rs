//! Dense neural stack with hand-written backpropagation: a two-layer GCN for
//! granular graphs, a two-layer MLP pixel baseline, SGD, and L-BFGS.

mod gcn;
mod lbfgs;
mod mlp;
mod params;

pub(crate) use gcn::{backward_parts, forward_parts};
pub use gcn::{gcn_forward, normalized_adjacency, GcnForward, GcnModel, GraphTopology, PreparedGraph};
pub use lbfgs::{lbfgs_minimize, lbfgs_minimize_projected, LbfgsConfig, LbfgsOutcome, Termination};
pub use mlp::{mlp_forward, MlpForward, MlpModel};
pub use params::{read_checkpoint, write_checkpoint, ParamLayout, ParamVector, Segment};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("parameter layout mismatch")]
    LayoutMismatch,
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
}

/// A fixed-architecture classifier with exact gradients.
pub trait Classifier: Sync {
    type Input: Sync;

    fn layout(&self) -> &ParamLayout;

    fn num_classes(&self) -> usize;

    fn logits(&self, params: &ParamVector, input: &Self::Input) -> Result<Vec<f64>, ModelError>;

    /// Cross-entropy loss and its gradient with respect to every parameter.
    fn loss_and_gradient(
        &self,
        params: &ParamVector,
        input: &Self::Input,
        label: usize,
    ) -> Result<(f64, ParamVector), ModelError>;

    /// Arg-max class, ties resolved to the lowest index.
    fn predict(&self, params: &ParamVector, input: &Self::Input) -> Result<usize, ModelError> {
        Ok(argmax(&self.logits(params, input)?))
    }
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Returns `(loss, dloss/dlogits)` with `dlogits = softmax - one_hot(label)`.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>), ModelError> {
    let classes = logits.len();
    if classes < 2 {
        return Err(ModelError::DimensionMismatch(format!(
            "need at least 2 classes, got {classes}"
        )));
    }
    if label >= classes {
        return Err(ModelError::LabelOutOfRange { label, classes });
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_total = logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    let loss = log_total - (logits[label] - max);
    let mut grad = softmax(logits);
    grad[label] -= 1.0;
    Ok((loss, grad))
}

/// `params - lr * grad`.
pub fn sgd_step(params: &ParamVector, grad: &ParamVector, lr: f64) -> Result<ParamVector, ModelError> {
    let mut out = params.clone();
    out.axpy(-lr, grad)?;
    Ok(out)
}

/// Mean loss and mean gradient over `batch`, accumulated in batch order.
pub fn batch_gradient<'a, M, I>(model: &M, params: &ParamVector, batch: I) -> Result<(f64, ParamVector), ModelError>
where
    M: Classifier,
    M::Input: 'a,
    I: IntoIterator<Item = (&'a M::Input, usize)>,
{
    let mut grad = ParamVector::zeros(model.layout().clone());
    let mut loss = 0.0;
    let mut n = 0usize;
    for (input, label) in batch {
        let (l, g) = model.loss_and_gradient(params, input, label)?;
        loss += l;
        grad.axpy(1.0, &g)?;
        n += 1;
    }
    if n > 0 {
        grad.scale(1.0 / n as f64);
        loss /= n as f64;
    }
    Ok((loss, grad))
}

pub(crate) fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_logits_give_ln_c() {
        let (loss, grad) = softmax_cross_entropy(&[0.7; 10], 3).unwrap();
        assert!((loss - 10f64.ln()).abs() < 1e-12);
        assert!((grad[3] + 0.9).abs() < 1e-12);
        assert!((grad[0] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn extreme_logits_do_not_overflow() {
        let (loss, grad) = softmax_cross_entropy(&[1000.0, -1000.0], 0).unwrap();
        assert!(loss.is_finite() && loss.abs() < 1e-12);
        assert!(grad.iter().all(|g| g.is_finite()));
        let (loss, _) = softmax_cross_entropy(&[1000.0, -1000.0], 1).unwrap();
        assert!((loss - 2000.0).abs() < 1e-9);
    }

    #[test]
    fn cross_entropy_gradient_matches_finite_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let logits: Vec<f64> = (0..6).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let label = rng.gen_range(0..6);
            let (_, grad) = softmax_cross_entropy(&logits, label).unwrap();
            for i in 0..6 {
                let h = 1e-6;
                let mut plus = logits.clone();
                plus[i] += h;
                let mut minus = logits.clone();
                minus[i] -= h;
                let fd = (softmax_cross_entropy(&plus, label).unwrap().0
                    - softmax_cross_entropy(&minus, label).unwrap().0)
                    / (2.0 * h);
                assert!((fd - grad[i]).abs() <= 1e-4 * fd.abs().max(1e-3), "{fd} vs {}", grad[i]);
            }
        }
    }

    #[test]
    fn cross_entropy_errors() {
        assert!(matches!(
            softmax_cross_entropy(&[0.0, 1.0], 2),
            Err(ModelError::LabelOutOfRange { label: 2, classes: 2 })
        ));
        assert!(softmax_cross_entropy(&[0.0], 0).is_err());
    }

    #[test]
    fn sgd_step_cases() {
        let layout = ParamLayout::new(vec![Segment::new("w", 1, 2)]);
        let p = ParamVector::from_values(layout.clone(), vec![1.0, 2.0]).unwrap();
        let g = ParamVector::from_values(layout.clone(), vec![1.0, 1.0]).unwrap();
        assert_eq!(sgd_step(&p, &g, 0.5).unwrap().values(), &[0.5, 1.5]);
        assert_eq!(sgd_step(&p, &g, 0.0).unwrap(), p);
        assert_eq!(sgd_step(&p, &ParamVector::zeros(layout), 0.3).unwrap(), p);
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
    }
}
