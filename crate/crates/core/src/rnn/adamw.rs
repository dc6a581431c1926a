use serde::{Deserialize, Serialize};

use super::Parameters;
use crate::error::{Error, Result};

/// AdamW hyperparameters. Defaults are the usual library defaults.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamWState {
    pub step: u64,
    pub first_moment: Parameters,
    pub second_moment: Parameters,
}

impl AdamWState {
    pub fn new(params: &Parameters) -> Self {
        AdamWState {
            step: 0,
            first_moment: Parameters::zeros_like(params),
            second_moment: Parameters::zeros_like(params),
        }
    }
}

/// One AdamW update in place. Weight decay is decoupled: parameters shrink by
/// `lr * weight_decay` before the bias-corrected Adam step is applied.
///
/// Non-finite gradients are rejected before anything is modified; the caller
/// attaches epoch and batch context to the returned error.
pub fn adamw_step(
    params: &mut Parameters,
    grads: &Parameters,
    state: &mut AdamWState,
    hyper: &AdamWConfig,
) -> Result<()> {
    if !grads.all_finite() {
        return Err(Error::Divergence {
            epoch: 0,
            batch: 0,
            reason: "non-finite gradient".into(),
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let bias1 = 1.0 - hyper.beta1.powi(t);
    let bias2 = 1.0 - hyper.beta2.powi(t);
    let decay = 1.0 - hyper.lr * hyper.weight_decay;

    let g_all = grads.slices();
    let m_all = state.first_moment.slices_mut();
    let v_all = state.second_moment.slices_mut();
    for (((p, g), m), v) in params
        .slices_mut()
        .into_iter()
        .zip(g_all)
        .zip(m_all)
        .zip(v_all)
    {
        for i in 0..p.len() {
            p[i] *= decay;
            m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * g[i];
            v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g[i] * g[i];
            let m_hat = m[i] / bias1;
            let v_hat = v[i] / bias2;
            p[i] -= hyper.lr * m_hat / (v_hat.sqrt() + hyper.eps);
        }
    }
    Ok(())
}
