use serde::{Deserialize, Serialize};

use super::PolicyParams;
use crate::error::{HedgeError, Result};

/// Adam moments and hyper-parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    pub m: PolicyParams,
    pub v: PolicyParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamHyper {
    pub fn with_rate(learning_rate: f64) -> Self {
        AdamHyper { learning_rate, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

impl AdamState {
    pub fn new(params: &PolicyParams, hyper: AdamHyper) -> Result<Self> {
        if !(hyper.learning_rate > 0.0 && hyper.learning_rate.is_finite()) {
            return Err(HedgeError::invalid("learning_rate", "must be positive and finite"));
        }
        if !(0.0..1.0).contains(&hyper.beta1) || !(0.0..1.0).contains(&hyper.beta2) {
            return Err(HedgeError::invalid("beta", "decay rates must lie in [0, 1)"));
        }
        if !(hyper.epsilon > 0.0) {
            return Err(HedgeError::invalid("epsilon", "must be positive"));
        }
        let zeros = PolicyParams::zeros(&params.config);
        Ok(AdamState {
            learning_rate: hyper.learning_rate,
            beta1: hyper.beta1,
            beta2: hyper.beta2,
            epsilon: hyper.epsilon,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        })
    }

    pub fn hyper(&self) -> AdamHyper {
        AdamHyper {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

/// One bias-corrected Adam update of `params` along `grads`.
pub fn adam_step(params: &mut PolicyParams, grads: &PolicyParams, state: &mut AdamState) -> Result<()> {
    if !params.same_shape(grads) || !params.same_shape(&state.m) {
        return Err(HedgeError::Contract("parameter, gradient and moment shapes differ".into()));
    }
    if !grads.is_finite() {
        return Err(HedgeError::Diverged("non-finite gradient".into()));
    }
    state.step += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let t = state.step as f64;
    let c1 = 1.0 - b1.powf(t);
    let c2 = 1.0 - b2.powf(t);
    let lr = state.learning_rate;
    let eps = state.epsilon;
    let ms = state.m.tensors_mut();
    let vs = state.v.tensors_mut();
    for (((p, g), m), v) in params.tensors_mut().into_iter().zip(grads.tensors()).zip(ms).zip(vs) {
        for k in 0..p.len() {
            m[k] = b1 * m[k] + (1.0 - b1) * g[k];
            v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
            p[k] -= lr * (m[k] / c1) / ((v[k] / c2).sqrt() + eps);
        }
    }
    Ok(())
}
