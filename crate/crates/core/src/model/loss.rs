use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};

/// Two weighted labels for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixedTarget {
    pub label_a: usize,
    pub label_b: usize,
    pub rho_a: f64,
    pub rho_b: f64,
}

impl MixedTarget {
    pub fn single(label: usize) -> Self {
        Self {
            label_a: label,
            label_b: label,
            rho_a: 1.0,
            rho_b: 0.0,
        }
    }

    pub fn validate(&self, num_classes: usize) -> Result<()> {
        if self.label_a >= num_classes || self.label_b >= num_classes {
            return Err(Error::invalid(format!(
                "labels ({}, {}) out of range for {num_classes} classes",
                self.label_a, self.label_b
            )));
        }
        if !(0.0..=1.0).contains(&self.rho_a) || !(0.0..=1.0).contains(&self.rho_b) {
            return Err(Error::invalid(format!(
                "label weights ({}, {}) outside [0, 1]",
                self.rho_a, self.rho_b
            )));
        }
        Ok(())
    }
}

pub fn log_softmax(logits: ArrayView1<f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let lse = max + logits.mapv(|v| (v - max).exp()).sum().ln();
    logits.mapv(|v| v - lse)
}

pub fn softmax(logits: ArrayView1<f64>) -> Array1<f64> {
    log_softmax(logits).mapv(f64::exp)
}

/// Softmax cross-entropy against a single class.
pub fn cross_entropy(logits: ArrayView1<f64>, label: usize) -> f64 {
    -log_softmax(logits)[label]
}

/// `rho_a * CE(logits, label_a) + rho_b * CE(logits, label_b)`.
///
/// Linear in the weights, so a zero-weight pair gives zero loss and gradient
/// even when `rho_a + rho_b != 1`.
pub fn mixed_loss(logits: ArrayView1<f64>, target: &MixedTarget) -> f64 {
    let ls = log_softmax(logits);
    let mut loss = 0.0;
    if target.rho_a != 0.0 {
        loss -= target.rho_a * ls[target.label_a];
    }
    if target.rho_b != 0.0 {
        loss -= target.rho_b * ls[target.label_b];
    }
    loss
}

/// d mixed_loss / d logits `= (rho_a + rho_b) softmax - rho_a e_a - rho_b e_b`.
pub fn mixed_loss_grad(logits: ArrayView1<f64>, target: &MixedTarget) -> Array1<f64> {
    let mut g = softmax(logits) * (target.rho_a + target.rho_b);
    g[target.label_a] -= target.rho_a;
    g[target.label_b] -= target.rho_b;
    g
}
