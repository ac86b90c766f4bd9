use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::nn::{ParamSet, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moment buffers for one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub config: AdamConfig,
    step: u64,
    m: ParamSet<T>,
    v: ParamSet<T>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(config: AdamConfig, params: &ParamSet<T>) -> Self {
        Self {
            config,
            step: 0,
            m: ParamSet::zeros_like(params),
            v: ParamSet::zeros_like(params),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn moments(&self) -> (&ParamSet<T>, &ParamSet<T>) {
        (&self.m, &self.v)
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step(&mut self, params: &mut ParamSet<T>, grads: &ParamSet<T>) -> Result<()> {
        params.check_compatible(grads)?;
        params.check_compatible(&self.m)?;
        self.step += 1;
        adam_update(
            params,
            grads,
            &mut self.m,
            &mut self.v,
            &self.config,
            self.step,
        );
        Ok(())
    }
}

/// Standard Adam with bias correction at step `t` (1-based).
pub fn adam_update<T: Scalar>(
    params: &mut ParamSet<T>,
    grads: &ParamSet<T>,
    m: &mut ParamSet<T>,
    v: &mut ParamSet<T>,
    cfg: &AdamConfig,
    t: u64,
) {
    let b1 = T::of(cfg.beta1);
    let b2 = T::of(cfg.beta2);
    let one = T::one();
    let bc1 = T::of(1.0 - cfg.beta1.powi(t as i32));
    let bc2 = T::of(1.0 - cfg.beta2.powi(t as i32));
    let lr = T::of(cfg.lr);
    let eps = T::of(cfg.eps);
    for (((p, g), m), v) in params
        .tensors_mut()
        .iter_mut()
        .zip(grads.tensors())
        .zip(m.tensors_mut())
        .zip(v.tensors_mut())
    {
        for (((p, &g), m), v) in p
            .values_mut()
            .iter_mut()
            .zip(g.values())
            .zip(m.values_mut())
            .zip(v.values_mut())
        {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}
