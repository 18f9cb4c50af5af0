//! Mean-pooled features, one rectified hidden layer and a softmax head.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{LeafError, Result};

pub const DEFAULT_HIDDEN: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct BackendModel {
    pub n_in: usize,
    pub hidden: usize,
    pub classes: usize,
    /// `hidden x n_in`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `classes x hidden`, row-major.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct BackendForward {
    pub pre: Vec<f64>,
    pub act: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BackendGrad {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub input: Vec<f64>,
}

impl BackendModel {
    /// He-initialised hidden layer, zero biases.
    pub fn random(n_in: usize, hidden: usize, classes: usize, seed: u64) -> Result<Self> {
        if n_in == 0 || hidden == 0 || classes < 2 {
            return Err(LeafError::Spec(format!(
                "backend needs inputs, hidden units and >= 2 classes (got {n_in}, {hidden}, {classes})"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n1 = Normal::new(0.0, (2.0 / n_in as f64).sqrt()).expect("valid std");
        let n2 = Normal::new(0.0, (1.0 / hidden as f64).sqrt()).expect("valid std");
        let w1 = (0..hidden * n_in).map(|_| n1.sample(&mut rng)).collect();
        let w2 = (0..classes * hidden).map(|_| n2.sample(&mut rng)).collect();
        Ok(Self {
            n_in,
            hidden,
            classes,
            w1,
            b1: vec![0.0; hidden],
            w2,
            b2: vec![0.0; classes],
        })
    }

    pub fn forward(&self, x: &[f64]) -> BackendForward {
        debug_assert_eq!(x.len(), self.n_in);
        let pre: Vec<f64> = (0..self.hidden)
            .map(|j| {
                let row = &self.w1[j * self.n_in..(j + 1) * self.n_in];
                self.b1[j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect();
        let act: Vec<f64> = pre.iter().map(|v| v.max(0.0)).collect();
        let logits: Vec<f64> = (0..self.classes)
            .map(|c| {
                let row = &self.w2[c * self.hidden..(c + 1) * self.hidden];
                self.b2[c] + row.iter().zip(&act).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect();
        let probs = softmax(&logits);
        BackendForward {
            pre,
            act,
            logits,
            probs,
        }
    }

    /// Gradient of `scale * cross_entropy(label)`.
    pub fn backward(&self, x: &[f64], fwd: &BackendForward, label: usize, scale: f64) -> BackendGrad {
        let gl: Vec<f64> = fwd
            .probs
            .iter()
            .enumerate()
            .map(|(c, p)| scale * (p - if c == label { 1.0 } else { 0.0 }))
            .collect();
        let mut w2 = vec![0.0; self.w2.len()];
        let mut gact = vec![0.0; self.hidden];
        for (c, g) in gl.iter().enumerate() {
            let row = &self.w2[c * self.hidden..(c + 1) * self.hidden];
            for j in 0..self.hidden {
                w2[c * self.hidden + j] = g * fwd.act[j];
                gact[j] += g * row[j];
            }
        }
        let gpre: Vec<f64> = gact
            .iter()
            .zip(&fwd.pre)
            .map(|(g, p)| if *p > 0.0 { *g } else { 0.0 })
            .collect();
        let mut w1 = vec![0.0; self.w1.len()];
        let mut input = vec![0.0; self.n_in];
        for (j, g) in gpre.iter().enumerate() {
            let row = &self.w1[j * self.n_in..(j + 1) * self.n_in];
            for i in 0..self.n_in {
                w1[j * self.n_in + i] = g * x[i];
                input[i] += g * row[i];
            }
        }
        BackendGrad {
            w1,
            b1: gpre,
            w2,
            b2: gl,
            input,
        }
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|e| e / total).collect()
}

/// `-ln softmax(logits)[label]`, computed with log-sum-exp.
pub fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    lse - logits[label]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_and_cross_entropy() {
        let p = softmax(&[0.0, 0.0]);
        assert_eq!(p, vec![0.5, 0.5]);
        assert!((cross_entropy(&[0.0, 0.0], 1) - 2f64.ln()).abs() < 1e-15);
        assert!(cross_entropy(&[1000.0, 0.0], 0).abs() < 1e-12);
        let big = softmax(&[1000.0, 999.0]);
        assert!((big.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zeroed_feature_has_dead_weight_gradient() {
        let m = BackendModel::random(4, 6, 3, 1).unwrap();
        let x = [0.3, 0.0, 1.2, 0.7];
        let fwd = m.forward(&x);
        let g = m.backward(&x, &fwd, 2, 1.0);
        for j in 0..6 {
            assert_eq!(g.w1[j * 4 + 1], 0.0);
        }
    }

    #[test]
    fn deterministic_init() {
        assert_eq!(
            BackendModel::random(5, 4, 2, 9).unwrap(),
            BackendModel::random(5, 4, 2, 9).unwrap()
        );
        assert!(BackendModel::random(5, 4, 1, 9).is_err());
    }
}
