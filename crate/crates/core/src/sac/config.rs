use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SacConfig {
    pub gamma: f64,
    pub alpha_init: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub global_buffer: usize,
    pub local_buffer: usize,
    pub workers: usize,
    pub tau: f64,
    pub target_entropy: f64,
    /// Gradient updates per collected environment step.
    pub updates_per_step: usize,
    /// Environment steps with uniform random actions before learning starts.
    pub warmup_steps: u64,
    /// Probability that a sampled training transition is passed through a
    /// random convolution (0 disables it).
    pub randconv_prob: f64,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            gamma: 0.98,
            alpha_init: 0.3,
            lr: 3e-4,
            batch_size: 64,
            global_buffer: 10_000,
            local_buffer: 2_000,
            workers: 1,
            tau: 0.005,
            target_entropy: -2.0,
            updates_per_step: 1,
            warmup_steps: 1_000,
            randconv_prob: 0.0,
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |key: &str, message: String| {
            Err(Error::Config {
                key: format!("sac.{key}"),
                message,
            })
        };
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return err("gamma", format!("must lie in [0, 1), got {}", self.gamma));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return err("tau", format!("must lie in (0, 1), got {}", self.tau));
        }
        if !(self.alpha_init > 0.0 && self.alpha_init.is_finite()) {
            return err("alpha_init", format!("must be positive, got {}", self.alpha_init));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return err("lr", format!("must be non-negative, got {}", self.lr));
        }
        if self.batch_size == 0 {
            return err("batch_size", "must be at least 1".into());
        }
        if self.batch_size > self.global_buffer {
            return err(
                "batch_size",
                format!("{} exceeds global_buffer {}", self.batch_size, self.global_buffer),
            );
        }
        if self.local_buffer == 0 {
            return err("local_buffer", "must be at least 1".into());
        }
        if self.workers == 0 {
            return err("workers", "must be at least 1".into());
        }
        if !self.target_entropy.is_finite() {
            return err("target_entropy", "must be finite".into());
        }
        if !(0.0..=1.0).contains(&self.randconv_prob) {
            return err("randconv_prob", format!("must lie in [0, 1], got {}", self.randconv_prob));
        }
        Ok(())
    }
}
