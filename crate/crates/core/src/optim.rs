//! Parameter updates from accumulated gradients.

use serde::{Deserialize, Serialize};

use crate::autodiff::ParamStore;
use crate::tensor::Tensor;

/// `w ← w − lr · g` for every parameter.
pub fn sgd_step(store: &mut ParamStore, lr: f64) {
    for (_, e) in store.iter_mut() {
        for (w, g) in e.value.data_mut().iter_mut().zip(e.grad.data()) {
            *w -= lr * g;
        }
    }
    store.steps += 1;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// L2 coefficient added to the gradient before the moment updates.
    pub weight_decay: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Self {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// One bias-corrected Adam update. Moment estimates are kept as the first
/// two optimizer slots of each parameter.
pub fn adam_step(store: &mut ParamStore, cfg: &Adam) {
    store.steps += 1;
    let t = store.steps as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (_, e) in store.iter_mut() {
        if e.slots.len() < 2 {
            e.slots = vec![Tensor::zeros_like(&e.value), Tensor::zeros_like(&e.value)];
        }
        let (m_slot, rest) = e.slots.split_first_mut().expect("two slots");
        let m = m_slot.data_mut();
        let v = rest[0].data_mut();
        let w = e.value.data_mut();
        for (i, &g) in e.grad.data().iter().enumerate() {
            let g = g + cfg.weight_decay * w[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            w[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
}
