use serde::{Deserialize, Serialize};

use super::dense::Dense;
use crate::numerics::{dropout_mask, relu, relu_backward, Matrix, Param, Rng};

/// MLP head over the extracted feature vector: hidden blocks of
/// dense + relu (+ dropout in train mode), then a linear output layer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpHead {
    layers: Vec<Dense>,
    pub dropout: f64,
}

pub(super) struct HeadCache {
    /// Input to each layer.
    inputs: Vec<Matrix>,
    /// Pre-activation of each hidden layer.
    pre: Vec<Matrix>,
    masks: Vec<Option<Matrix>>,
}

impl MlpHead {
    pub fn new(input: usize, hidden: &[usize], output: usize, dropout: f64, rng: &mut Rng) -> Self {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut width = input;
        for &h in hidden {
            layers.push(Dense::new(width, h, rng));
            width = h;
        }
        layers.push(Dense::new(width, output, rng));
        MlpHead { layers, dropout }
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(|l| l.w.value.cols())
            .collect()
    }

    pub fn forward_eval(&self, x: &Matrix) -> Matrix {
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(&h);
            if i + 1 < self.layers.len() {
                h = relu(&h);
            }
        }
        h
    }

    /// Forward pass keeping the activations backward needs. Dropout fires
    /// only when a training RNG is supplied.
    pub(super) fn forward_cached(
        &self,
        x: &Matrix,
        mut rng: Option<&mut Rng>,
    ) -> (Matrix, HeadCache) {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::new();
        let mut masks = Vec::new();
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            inputs.push(h.clone());
            h = layer.forward(&h);
            if i + 1 < self.layers.len() {
                pre.push(h.clone());
                h = relu(&h);
                let mask = match rng.as_deref_mut() {
                    Some(rng) if self.dropout > 0.0 => {
                        Some(dropout_mask(h.rows(), h.cols(), self.dropout, rng))
                    }
                    _ => None,
                };
                if let Some(m) = &mask {
                    for (v, &d) in h.data_mut().iter_mut().zip(m.data()) {
                        *v *= d;
                    }
                }
                masks.push(mask);
            }
        }
        (h, HeadCache { inputs, pre, masks })
    }

    /// Accumulates parameter gradients, returns dL/dx.
    pub(super) fn backward(&mut self, cache: &HeadCache, dlogits: &Matrix) -> Matrix {
        let mut d = dlogits.clone();
        for i in (0..self.layers.len()).rev() {
            if i < self.layers.len() - 1 {
                if let Some(mask) = &cache.masks[i] {
                    for (v, &m) in d.data_mut().iter_mut().zip(mask.data()) {
                        *v *= m;
                    }
                }
                d = relu_backward(&cache.pre[i], &d);
            }
            d = self.layers[i].backward(&cache.inputs[i], &d);
        }
        d
    }

    pub(super) fn collect_params<'a>(&'a mut self, out: &mut Vec<&'a mut Param>) {
        for layer in self.layers.iter_mut() {
            out.push(&mut layer.w);
            out.push(&mut layer.b);
        }
    }

    pub(super) fn param_names(&self, prefix: &str, out: &mut Vec<String>) {
        for i in 0..self.layers.len() {
            out.push(format!("{prefix}.layer[{i}].w"));
            out.push(format!("{prefix}.layer[{i}].b"));
        }
    }
}
