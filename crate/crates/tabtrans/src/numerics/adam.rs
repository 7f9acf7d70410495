use serde::{Deserialize, Serialize};

use super::{Matrix, Param};

/// How the weight-decay term enters the update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum WeightDecayMode {
    /// Multiplicative shrinkage applied alongside the adaptive update
    /// (AdamW-style). The default.
    #[default]
    Decoupled,
    /// Classic L2: decay added to the gradient before the moments.
    L2InGradient,
}

/// Adam optimizer state shared across a list of parameters. Moments are
/// stored per parameter and matched by index.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Matrix>,
    v: Vec<Matrix>,
    t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub decay_mode: WeightDecayMode,
}

impl AdamState {
    pub fn new(params: &[&Param], lr: f64, weight_decay: f64) -> Self {
        let m = params
            .iter()
            .map(|p| Matrix::zeros(p.value.rows(), p.value.cols()))
            .collect();
        let v = params
            .iter()
            .map(|p| Matrix::zeros(p.value.rows(), p.value.cols()))
            .collect();
        AdamState {
            m,
            v,
            t: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            decay_mode: WeightDecayMode::Decoupled,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One bias-corrected Adam step over `params`; gradients are zeroed
    /// afterwards.
    pub fn step(&mut self, params: &mut [&mut Param]) {
        assert_eq!(params.len(), self.m.len(), "param list changed size");
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (i, p) in params.iter_mut().enumerate() {
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            let value = p.value.data_mut();
            let grad = p.grad.data_mut();
            for j in 0..value.len() {
                let mut g = grad[j];
                if self.decay_mode == WeightDecayMode::L2InGradient {
                    g += self.weight_decay * value[j];
                }
                m.data_mut()[j] = self.beta1 * m.data()[j] + (1.0 - self.beta1) * g;
                v.data_mut()[j] = self.beta2 * v.data()[j] + (1.0 - self.beta2) * g * g;
                let mhat = m.data()[j] / bc1;
                let vhat = v.data()[j] / bc2;
                value[j] -= self.lr * mhat / (vhat.sqrt() + self.eps);
                if self.decay_mode == WeightDecayMode::Decoupled {
                    value[j] -= self.lr * self.weight_decay * value[j];
                }
                grad[j] = 0.0;
            }
        }
    }
}
