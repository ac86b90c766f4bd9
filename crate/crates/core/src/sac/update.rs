//! Soft actor-critic loss terms, generic over the scalar type so gradient
//! checks can run in `f64`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::buffer::Transition;
use crate::error::{Error, Result};
use crate::nn::policy::{sample_squashed_gaussian, squashed_backward};
use crate::nn::{BackwardWants, Network, ParamSet, Scalar, Tensor, ACTION_DIM};
use crate::regularizers::{assemble_penalty, IrSpeed, RegBatch, RegConfig, SmoothLossReport};
use crate::transforms::TransformSuite;

/// Mini-batch in tensor form.
#[derive(Debug, Clone)]
pub struct Batch<T> {
    /// `N×1×H×W`.
    pub obs: Tensor<T>,
    /// `N×2`.
    pub actions: Tensor<T>,
    pub rewards: Vec<T>,
    pub next_obs: Tensor<T>,
    pub done: Vec<bool>,
    /// Speed term of the IR weight, per the configured speed source.
    pub speed01: Vec<f64>,
    pub reward01: Vec<f64>,
}

impl<T: Scalar> Batch<T> {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn from_transitions(items: &[&Transition], ir_speed: IrSpeed) -> Result<Self> {
        let first = items
            .first()
            .ok_or_else(|| Error::param("cannot build an empty batch"))?;
        let (h, w) = (first.obs.height(), first.obs.width());
        let n = items.len();
        let mut obs = Vec::with_capacity(n * h * w);
        let mut next = Vec::with_capacity(n * h * w);
        let mut actions = Vec::with_capacity(n * ACTION_DIM);
        for t in items {
            if t.obs.height() != h || t.obs.width() != w || !t.obs.same_size(&t.next_obs) {
                return Err(Error::shape("batch observations differ in size"));
            }
            obs.extend(t.obs.pixels().iter().map(|&p| T::of(p as f64)));
            next.extend(t.next_obs.pixels().iter().map(|&p| T::of(p as f64)));
            actions.extend(t.action.iter().map(|&a| T::of(a as f64)));
        }
        Ok(Self {
            obs: Tensor::new(vec![n, 1, h, w], obs)?,
            actions: Tensor::new(vec![n, ACTION_DIM], actions)?,
            rewards: items.iter().map(|t| T::of(t.reward as f64)).collect(),
            next_obs: Tensor::new(vec![n, 1, h, w], next)?,
            done: items.iter().map(|t| t.done).collect(),
            speed01: items
                .iter()
                .map(|t| match ir_speed {
                    IrSpeed::Commanded => t.speed_norm01 as f64,
                    IrSpeed::Measured => t.measured_speed01 as f64,
                })
                .collect(),
            reward01: items.iter().map(|t| t.reward_norm01 as f64).collect(),
        })
    }

    pub fn reg_batch(&self) -> RegBatch<'_, T> {
        RegBatch {
            obs: &self.obs,
            next_obs: &self.next_obs,
            done: &self.done,
            speed01: &self.speed01,
            reward01: &self.reward01,
        }
    }
}

/// Standard-normal noise for `n` reparameterized action draws.
pub fn action_noise<T: Scalar, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Tensor<T> {
    let v = (0..n * ACTION_DIM)
        .map(|_| T::of(StandardNormal.sample(rng)))
        .collect();
    Tensor::new(vec![n, ACTION_DIM], v).expect("sized from n")
}

fn split_head<T: Scalar>(row: &[T]) -> (&[T], &[T]) {
    (&row[..ACTION_DIM], &row[ACTION_DIM..2 * ACTION_DIM])
}

/// Bellman targets `r + gamma (1 - done) (min Q'(s', a') - alpha log pi(a'|s'))`
/// with `a'` drawn from the policy using `noise`.
pub fn critic_target<T: Scalar>(
    batch: &Batch<T>,
    policy: &Network<T>,
    q1_target: &Network<T>,
    q2_target: &Network<T>,
    alpha: T,
    gamma: T,
    noise: &Tensor<T>,
) -> Result<Vec<T>> {
    let n = batch.len();
    if n == 0 {
        return Err(Error::param("critic_target: empty batch"));
    }
    noise.check_shape(&[n, ACTION_DIM], "target noise")?;
    if gamma == T::zero() || batch.done.iter().all(|&d| d) {
        return Ok(batch.rewards.clone());
    }
    let (out, _) = policy.forward(&batch.next_obs, None)?;
    let mut next_actions = Vec::with_capacity(n * ACTION_DIM);
    let mut log_probs = Vec::with_capacity(n);
    for i in 0..n {
        let (mean, log_std) = split_head(out.row(i));
        let s = sample_squashed_gaussian(mean, log_std, noise.row(i));
        next_actions.extend_from_slice(&s.action);
        log_probs.push(s.log_prob);
    }
    let a = Tensor::new(vec![n, ACTION_DIM], next_actions)?;
    let (q1, _) = q1_target.forward(&batch.next_obs, Some(&a))?;
    let (q2, _) = q2_target.forward(&batch.next_obs, Some(&a))?;
    Ok((0..n)
        .map(|i| {
            if batch.done[i] {
                batch.rewards[i]
            } else {
                let v = q1.values()[i].min(q2.values()[i]) - alpha * log_probs[i];
                batch.rewards[i] + gamma * v
            }
        })
        .collect())
}

/// Mean squared error of one critic against `targets` and its gradient.
pub fn critic_loss<T: Scalar>(
    q: &Network<T>,
    batch: &Batch<T>,
    targets: &[T],
) -> Result<(f64, ParamSet<T>)> {
    let n = batch.len();
    if n == 0 || targets.len() != n {
        return Err(Error::shape("critic_loss: targets do not match the batch"));
    }
    let (pred, cache) = q.forward(&batch.obs, Some(&batch.actions))?;
    let inv = T::of(1.0 / n as f64);
    let mut loss = 0.0;
    let mut up = Vec::with_capacity(n);
    for i in 0..n {
        let e = pred.values()[i] - targets[i];
        loss += e.as_f64() * e.as_f64();
        up.push(T::of(2.0) * e * inv);
    }
    let g = q.backward(&cache, &Tensor::new(vec![n, 1], up)?, BackwardWants::PARAMS)?;
    Ok((loss / n as f64, g.params.expect("requested params")))
}

/// Actor loss, its parameter gradient and diagnostics.
#[derive(Debug, Clone)]
pub struct ActorOutput<T> {
    /// SAC term plus smoothness penalty.
    pub loss: f64,
    pub sac_loss: f64,
    pub penalty: SmoothLossReport,
    pub mean_log_prob: f64,
    pub grad: ParamSet<T>,
}

/// `mean(alpha log pi(a|s) - min(Q1, Q2)(s, a)) + penalty`, with `a`
/// reparameterized through `noise`.
#[allow(clippy::too_many_arguments)]
pub fn actor_objective<T: Scalar, R: Rng + ?Sized>(
    batch: &Batch<T>,
    policy: &Network<T>,
    q1: &Network<T>,
    q2: &Network<T>,
    alpha: T,
    reg: &RegConfig,
    suite: &TransformSuite,
    noise: &Tensor<T>,
    reg_rng: &mut R,
) -> Result<ActorOutput<T>> {
    let n = batch.len();
    if n == 0 {
        return Err(Error::param("actor_objective: empty batch"));
    }
    noise.check_shape(&[n, ACTION_DIM], "actor noise")?;
    let (out, cache) = policy.forward(&batch.obs, None)?;
    let samples: Vec<_> = (0..n)
        .map(|i| {
            let (mean, log_std) = split_head(out.row(i));
            sample_squashed_gaussian(mean, log_std, noise.row(i))
        })
        .collect();
    let actions = Tensor::new(
        vec![n, ACTION_DIM],
        samples.iter().flat_map(|s| s.action.iter().copied()).collect(),
    )?;
    let (v1, c1) = q1.forward(&batch.obs, Some(&actions))?;
    let (v2, c2) = q2.forward(&batch.obs, Some(&actions))?;

    let inv = T::of(1.0 / n as f64);
    let mut sac_loss = 0.0;
    let mut mean_lp = 0.0;
    let mut up1 = vec![T::zero(); n];
    let mut up2 = vec![T::zero(); n];
    for i in 0..n {
        let (a, b) = (v1.values()[i], v2.values()[i]);
        let lp = samples[i].log_prob;
        sac_loss += (alpha * lp - a.min(b)).as_f64();
        mean_lp += lp.as_f64();
        if a <= b {
            up1[i] = -inv;
        } else {
            up2[i] = -inv;
        }
    }
    sac_loss /= n as f64;
    mean_lp /= n as f64;
    let g1 = q1.backward(&c1, &Tensor::new(vec![n, 1], up1)?, BackwardWants::EXTRA_INPUT)?;
    let g2 = q2.backward(&c2, &Tensor::new(vec![n, 1], up2)?, BackwardWants::EXTRA_INPUT)?;
    let da1 = g1.extra_input.expect("requested extra input");
    let da2 = g2.extra_input.expect("requested extra input");

    let width = policy.spec().output_width();
    let mut d_out = Tensor::<T>::zeros(vec![n, width]);
    for i in 0..n {
        let d_action: Vec<T> = (0..ACTION_DIM)
            .map(|j| da1.row(i)[j] + da2.row(i)[j])
            .collect();
        let (_, log_std_raw) = split_head(out.row(i));
        let (dm, dls) = squashed_backward(&samples[i], log_std_raw, &d_action, alpha * inv);
        let row = d_out.row_mut(i);
        row[..ACTION_DIM].copy_from_slice(&dm);
        row[ACTION_DIM..2 * ACTION_DIM].copy_from_slice(&dls);
    }

    let penalty = assemble_penalty(policy, &out, &batch.reg_batch(), reg, suite, reg_rng)?;
    if let Some(d) = &penalty.d_out_t {
        d_out.add_scaled(d, T::one())?;
    }
    let mut grad = policy
        .backward(&cache, &d_out, BackwardWants::PARAMS)?
        .params
        .expect("requested params");
    if let Some(extra) = &penalty.param_grad {
        grad.add_scaled(extra, T::one())?;
    }
    Ok(ActorOutput {
        loss: sac_loss + penalty.report.penalty_total,
        sac_loss,
        penalty: penalty.report,
        mean_log_prob: mean_lp,
        grad,
    })
}

/// Entropy temperature, optimized in log space with Adam.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Temperature {
    pub log_alpha: f64,
    m: f64,
    v: f64,
    t: u64,
}

impl Temperature {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::param(format!("alpha must be positive, got {alpha}")));
        }
        Ok(Self {
            log_alpha: alpha.ln(),
            m: 0.0,
            v: 0.0,
            t: 0,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    /// Step on `-log_alpha * (log_prob + target_entropy)`. Entropy above the
    /// target lowers alpha, below raises it.
    pub fn update(&mut self, mean_log_prob: f64, target_entropy: f64, lr: f64) -> f64 {
        let (b1, b2, eps) = (0.9, 0.999, 1e-8);
        let g = -(mean_log_prob + target_entropy);
        self.t += 1;
        self.m = b1 * self.m + (1.0 - b1) * g;
        self.v = b2 * self.v + (1.0 - b2) * g * g;
        let mh = self.m / (1.0 - b1.powi(self.t as i32));
        let vh = self.v / (1.0 - b2.powi(self.t as i32));
        self.log_alpha -= lr * mh / (vh.sqrt() + eps);
        self.alpha()
    }
}

/// Move `target` toward `source`: `target = (1 - tau) target + tau source`.
pub fn soft_update<T: Scalar>(target: &mut Network<T>, source: &Network<T>, tau: T) -> Result<()> {
    target.params().check_compatible(source.params())?;
    let keep = T::one() - tau;
    for (t, s) in target
        .params_mut()
        .tensors_mut()
        .iter_mut()
        .zip(source.params().tensors())
    {
        for (a, &b) in t.values_mut().iter_mut().zip(s.values()) {
            *a = keep * *a + tau * b;
        }
    }
    Ok(())
}
