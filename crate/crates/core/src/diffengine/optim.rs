//! Adam with projection onto the feasible parameter set, and the cosine
//! learning-rate schedule with warm restarts.

use std::f64::consts::PI;

use super::{Group, Model, ParamVector};
use crate::error::{LeafError, Result};

pub const DEFAULT_LR_MAX: f64 = 1e-3;
pub const DEFAULT_LR_MIN: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: AdamConfig,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(n_params: usize) -> Self {
        Self {
            config: AdamConfig::default(),
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
        }
    }

    /// One Adam update of `model` followed by projection of the bounded
    /// groups.
    pub fn adam_step(&mut self, model: &mut Model, grad: &ParamVector, lr: f64) -> Result<()> {
        let mut params = model.to_vector();
        if grad.layout != params.layout || self.m.len() != params.values.len() {
            return Err(LeafError::Spec(format!(
                "optimizer holds {} moments, model has {} parameters",
                self.m.len(),
                params.values.len()
            )));
        }
        if !grad.is_finite() {
            return Err(LeafError::Numerics { stage: "gradient" });
        }
        let AdamConfig { beta1, beta2, eps } = self.config;
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (i, (p, g)) in params.values.iter_mut().zip(&grad.values).enumerate() {
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        if !params.is_finite() {
            return Err(LeafError::Numerics { stage: "adam" });
        }
        model.load_vector(&params)?;
        model.project();
        Ok(())
    }
}

/// `lr_min + (lr_max - lr_min) (1 + cos(pi (step mod period) / period)) / 2`.
pub fn cosine_annealing_lr(step: u64, period: u64, lr_max: f64, lr_min: f64) -> f64 {
    let period = period.max(1);
    let phase = (step % period) as f64 / period as f64;
    lr_min + 0.5 * (lr_max - lr_min) * (1.0 + (PI * phase).cos())
}

/// Zeroes gradient entries of bounded parameters that sit on a bound and
/// point outward, so a descent step would only be undone by projection.
pub fn mask_active_bounds(model: &Model, grad: &mut ParamVector) {
    let values = model.to_vector();
    for g in Group::ALL {
        let Some((lo, hi)) = model.bounds(g) else {
            continue;
        };
        for (v, d) in values.group(g).iter().zip(grad.group_mut(g)) {
            if (*v <= lo && *d > 0.0) || (*v >= hi && *d < 0.0) {
                *d = 0.0;
            }
        }
    }
}
