use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Optimizer and schedule settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub lr: f64,
    /// Gradients are rescaled to at most this L2 norm.
    pub grad_clip_norm: f64,
    /// Fraction the learning rate is cut by on a plateau (`lr <- (1 - d) lr`).
    pub plateau_decay: f64,
    pub plateau_patience: usize,
    pub early_stop_patience: usize,
    pub max_epochs: usize,
    /// Optimization stops once the best loss is at or below this.
    pub target_loss: f64,
    pub min_lr: f64,
    pub fd_step_rel: f64,
    pub fd_step_abs: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            grad_clip_norm: 1.0,
            plateau_decay: 0.25,
            plateau_patience: 1,
            early_stop_patience: 50,
            max_epochs: 2000,
            target_loss: 0.0,
            min_lr: 1e-6,
            fd_step_rel: 1e-4,
            fd_step_abs: 1e-7,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if !(self.plateau_decay > 0.0 && self.plateau_decay < 1.0) {
            return Err(Error::invalid("plateau decay must lie in (0, 1)"));
        }
        if self.plateau_patience == 0 || self.early_stop_patience == 0 {
            return Err(Error::invalid("patience values must be at least 1"));
        }
        if !(self.target_loss >= 0.0) {
            return Err(Error::invalid("target loss must be non-negative"));
        }
        if !(self.grad_clip_norm > 0.0) {
            return Err(Error::invalid("gradient clip norm must be positive"));
        }
        if !(self.fd_step_rel > 0.0 && self.fd_step_abs > 0.0) {
            return Err(Error::invalid("finite-difference steps must be positive"));
        }
        Ok(())
    }

    /// Learning rate after `events` plateau reductions, floored at `min_lr`.
    pub fn lr_after(&self, events: u32) -> f64 {
        (self.lr * (1.0 - self.plateau_decay).powi(events as i32)).max(self.min_lr)
    }

    pub fn fingerprint(&self) -> String {
        fingerprint(self)
    }
}

/// Short stable fingerprint of a configuration (FNV-1a over its JSON form).
pub fn fingerprint<T: serde::Serialize>(config: &T) -> String {
    let json = serde_json::to_string(config).expect("config serializes");
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in json.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    format!("{h:016x}")
}
