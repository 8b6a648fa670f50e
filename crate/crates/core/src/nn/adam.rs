use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bias-corrected Adam moments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One Adam update of `params` in place.
pub fn adam_step(params: &mut [f64], grad: &[f64], state: &mut AdamState) -> Result<()> {
    if params.len() != grad.len() || state.m.len() != grad.len() {
        return Err(Error::Dimension {
            context: "adam step",
            expected: params.len(),
            got: grad.len(),
        });
    }
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite { what: "gradient", index: i });
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    for i in 0..params.len() {
        let g = grad[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let mhat = state.m[i] / c1;
        let vhat = state.v[i] / c2;
        params[i] -= state.lr * mhat / (vhat.sqrt() + state.eps);
    }
    Ok(())
}

/// Learning-rate schedule over a run of `total` iterations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    #[default]
    Constant,
    /// `lr0 * (1 + cos(pi j / J)) / 2`
    Cosine,
}

impl LrSchedule {
    pub fn lr(self, lr0: f64, j: usize, total: usize) -> f64 {
        match self {
            LrSchedule::Constant => lr0,
            LrSchedule::Cosine => {
                let frac = j as f64 / total.max(1) as f64;
                lr0 * 0.5 * (1.0 + (std::f64::consts::PI * frac).cos())
            }
        }
    }
}
