use super::{relu, softmax_cross_entropy, Classifier, ModelError, ParamLayout, ParamVector, Segment};
use crate::data::Image;

/// Two-layer pixel MLP without biases: `W1: n x h`, `W2: h x C`.
#[derive(Debug, Clone)]
pub struct MlpModel {
    inputs: usize,
    hidden: usize,
    classes: usize,
    layout: ParamLayout,
}

#[derive(Debug, Clone)]
pub struct MlpForward {
    pub pre: Vec<f64>,
    pub hidden: Vec<f64>,
    pub logits: Vec<f64>,
}

impl MlpModel {
    pub fn new(inputs: usize, hidden: usize, classes: usize) -> Self {
        Self {
            inputs,
            hidden,
            classes,
            layout: ParamLayout::new(vec![
                Segment::new("mlp.w1", inputs, hidden),
                Segment::new("mlp.w2", hidden, classes),
            ]),
        }
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub(crate) fn check(&self, params: &ParamVector, x: &[f64]) -> Result<(), ModelError> {
        if params.layout() != &self.layout {
            return Err(ModelError::DimensionMismatch(
                "parameters do not match the MLP layout".into(),
            ));
        }
        if x.len() != self.inputs {
            return Err(ModelError::DimensionMismatch(format!(
                "MLP expects {} inputs, got {}",
                self.inputs,
                x.len()
            )));
        }
        Ok(())
    }

    /// Gradients of the loss given a forward cache and `dlogits`.
    pub(crate) fn backward(&self, params: &ParamVector, x: &[f64], fwd: &MlpForward, dlogits: &[f64]) -> ParamVector {
        let (h, c) = (self.hidden, self.classes);
        let w2 = params.segment(1);
        let mut grad = ParamVector::zeros(self.layout.clone());
        {
            let g2 = grad.segment_mut(1);
            for j in 0..h {
                for m in 0..c {
                    g2[j * c + m] = fwd.hidden[j] * dlogits[m];
                }
            }
        }
        let dpre: Vec<f64> = (0..h)
            .map(|j| {
                if fwd.pre[j] > 0.0 {
                    w2[j * c..(j + 1) * c].iter().zip(dlogits).map(|(w, d)| w * d).sum()
                } else {
                    0.0
                }
            })
            .collect();
        let g1 = grad.segment_mut(0);
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                for (g, d) in g1[i * h..(i + 1) * h].iter_mut().zip(&dpre) {
                    *g = xi * d;
                }
            }
        }
        grad
    }
}

pub fn mlp_forward(model: &MlpModel, x: &[f64], params: &ParamVector) -> Result<MlpForward, ModelError> {
    model.check(params, x)?;
    let (h, c) = (model.hidden, model.classes);
    let (w1, w2) = (params.segment(0), params.segment(1));
    let mut pre = vec![0.0; h];
    for (i, &xi) in x.iter().enumerate() {
        if xi != 0.0 {
            for (p, w) in pre.iter_mut().zip(&w1[i * h..(i + 1) * h]) {
                *p += xi * w;
            }
        }
    }
    let hidden: Vec<f64> = pre.iter().map(|&v| relu(v)).collect();
    let mut logits = vec![0.0; c];
    for (j, &u) in hidden.iter().enumerate() {
        for (z, w) in logits.iter_mut().zip(&w2[j * c..(j + 1) * c]) {
            *z += u * w;
        }
    }
    Ok(MlpForward { pre, hidden, logits })
}

impl Classifier for MlpModel {
    type Input = Image;

    fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    fn num_classes(&self) -> usize {
        self.classes
    }

    fn logits(&self, params: &ParamVector, input: &Image) -> Result<Vec<f64>, ModelError> {
        Ok(mlp_forward(self, input.pixels(), params)?.logits)
    }

    fn loss_and_gradient(
        &self,
        params: &ParamVector,
        input: &Image,
        label: usize,
    ) -> Result<(f64, ParamVector), ModelError> {
        let x = input.pixels();
        let fwd = mlp_forward(self, x, params)?;
        let (loss, dlogits) = softmax_cross_entropy(&fwd.logits, label)?;
        Ok((loss, self.backward(params, x, &fwd, &dlogits)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Image {
        Image::new(3, 2, vec![0.1, 0.5, 0.9, 0.0, 0.3, 0.7]).unwrap()
    }

    #[test]
    fn zero_first_layer_gives_ln_c() {
        let model = MlpModel::new(6, 4, 10);
        let params = ParamVector::zeros(model.layout().clone());
        let (loss, _) = model.loss_and_gradient(&params, &sample(), 7).unwrap();
        assert!((loss - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn hidden_unit_permutation_leaves_logits_unchanged() {
        let model = MlpModel::new(6, 4, 3);
        let params = ParamVector::glorot(model.layout().clone(), 8);
        let mut swapped = params.clone();
        let (h, c) = (4, 3);
        for i in 0..6 {
            let w1 = swapped.segment_mut(0);
            w1.swap(i * h + 1, i * h + 3);
        }
        for m in 0..c {
            let w2 = swapped.segment_mut(1);
            w2.swap(c + m, 3 * c + m);
        }
        let a = model.logits(&params, &sample()).unwrap();
        let b = model.logits(&swapped, &sample()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn input_size_is_checked() {
        let model = MlpModel::new(5, 4, 3);
        let params = ParamVector::zeros(model.layout().clone());
        assert!(model.logits(&params, &sample()).is_err());
    }
}
