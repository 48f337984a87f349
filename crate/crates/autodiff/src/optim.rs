use crate::params::{Gradients, ParamStore};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamWConfig {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
    pub weight_decay: f32,
    /// Global gradient-norm clip applied before the update.
    pub clip_norm: Option<f32>,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig { lr: 3e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 1e-4, clip_norm: Some(5.0) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    /// Global gradient norm before clipping.
    pub grad_norm: f32,
    pub clipped: bool,
}

/// Adam with decoupled weight decay. First and second moments are kept per
/// parameter, aligned with the store.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub config: AdamWConfig,
    step: u64,
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
}

impl AdamW {
    pub fn new(config: AdamWConfig, store: &ParamStore) -> AdamW {
        let zeros = || store.params().iter().map(|p| vec![0.0; p.value.len()]).collect();
        AdamW { config, step: 0, m: zeros(), v: zeros() }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn set_lr(&mut self, lr: f32) {
        self.config.lr = lr;
    }

    pub fn moments(&self, index: usize) -> (&[f32], &[f32]) {
        (&self.m[index], &self.v[index])
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients) -> StepStats {
        let c = self.config;
        let mut grads = grads.clone();
        let grad_norm = match c.clip_norm {
            Some(max) => grads.clip_global_norm(max),
            None => grads.global_norm(),
        };
        let clipped = c.clip_norm.is_some_and(|max| grad_norm > max);
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - (c.beta1 as f64).powi(t);
        let bc2 = 1.0 - (c.beta2 as f64).powi(t);
        for (i, (p, g)) in store.params_mut().iter_mut().zip(grads.iter()).enumerate() {
            assert_eq!(p.value.len(), g.len(), "gradient shape mismatch for '{}'", p.name);
            let decay = if p.decay { 1.0 - c.lr * c.weight_decay } else { 1.0 };
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for j in 0..g.len() {
                let gj = g.data[j];
                m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * gj;
                v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * gj * gj;
                let mhat = m[j] as f64 / bc1;
                let vhat = v[j] as f64 / bc2;
                let x = &mut p.value.data[j];
                *x *= decay;
                *x -= (c.lr as f64 * mhat / (vhat.sqrt() + c.eps as f64)) as f32;
            }
        }
        StepStats { grad_norm, clipped }
    }
}
