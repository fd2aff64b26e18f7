use serde::{Deserialize, Serialize};

/// First-order update rule for the policy logits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    #[default]
    Adam,
    Sgd,
}

/// Adam for gradient ascent.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn ascend(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p += self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

/// Optimizer state bound to one parameter vector, with gradient-norm
/// clipping.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOptimizer {
    kind: Optimizer,
    lr: f64,
    clip: f64,
    adam: Adam,
}

impl PolicyOptimizer {
    pub fn new(kind: Optimizer, n_params: usize, lr: f64, clip: f64) -> Self {
        Self {
            kind,
            lr,
            clip,
            adam: Adam::new(n_params, lr),
        }
    }

    pub fn ascend(&mut self, params: &mut [f64], grad: &[f64]) {
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let scale = if self.clip > 0.0 && norm > self.clip {
            self.clip / norm
        } else {
            1.0
        };
        let grad: Vec<f64> = grad.iter().map(|g| g * scale).collect();
        match self.kind {
            Optimizer::Adam => self.adam.ascend(params, &grad),
            Optimizer::Sgd => params.iter_mut().zip(&grad).for_each(|(p, g)| *p += self.lr * g),
        }
    }
}
