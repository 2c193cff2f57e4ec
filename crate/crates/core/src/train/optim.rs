use serde::{Deserialize, Serialize};

use crate::nn::{ModelParams, Parameterized};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled decay, applied to weight matrices only.
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-2,
        }
    }
}

/// AdamW with bias correction and decoupled weight decay.
#[derive(Clone, Debug)]
pub struct AdamW {
    pub config: AdamWConfig,
    first: ModelParams,
    second: ModelParams,
    steps: u64,
}

impl AdamW {
    pub fn new(params: &ModelParams, config: AdamWConfig) -> Self {
        Self {
            config,
            first: params.zeros_like(),
            second: params.zeros_like(),
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// One update. Tensors for which `frozen(name)` holds are left untouched.
    pub fn step(&mut self, params: &mut ModelParams, grad: &ModelParams, lr: f64, frozen: &dyn Fn(&str) -> bool) {
        self.steps += 1;
        let c = self.config;
        let bias1 = 1.0 - c.beta1.powi(self.steps as i32);
        let bias2 = 1.0 - c.beta2.powi(self.steps as i32);
        let tensors = params
            .named_tensors_mut()
            .into_iter()
            .zip(grad.named_tensors())
            .zip(self.first.named_tensors_mut())
            .zip(self.second.named_tensors_mut());
        for ((((name, p), (_, g)), (_, m)), (_, v)) in tensors {
            if frozen(&name) {
                continue;
            }
            let decay = if p.kind.decays() { lr * c.weight_decay } else { 0.0 };
            for i in 0..p.data.len() {
                let gi = g.data[i];
                m.data[i] = c.beta1 * m.data[i] + (1.0 - c.beta1) * gi;
                v.data[i] = c.beta2 * v.data[i] + (1.0 - c.beta2) * gi * gi;
                let m_hat = m.data[i] / bias1;
                let v_hat = v.data[i] / bias2;
                p.data[i] -= decay * p.data[i] + lr * m_hat / (v_hat.sqrt() + c.eps);
            }
        }
    }
}

/// Stepwise schedule: `base * factor^floor(epoch / every)`.
pub fn learning_rate_at(base: f64, factor: f64, every: usize, epoch: usize) -> f64 {
    base * factor.powi((epoch / every.max(1)) as i32)
}

/// Rescales `grad` so its global L2 norm is at most `max_norm`. Returns the
/// norm before clipping.
pub fn clip_global_norm(grad: &mut ModelParams, max_norm: f64) -> f64 {
    let norm = grad.squared_norm().sqrt();
    if norm > max_norm && norm > 0.0 {
        grad.scale(max_norm / norm);
    }
    norm
}
