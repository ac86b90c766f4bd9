//! Tanh-squashed diagonal Gaussian policy head.

use crate::nn::Scalar;

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Sampled actions are kept strictly inside `(-1, 1)`.
const ACTION_BOUND: f64 = 1.0 - 1e-6;

/// One reparameterized draw from the squashed Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct SquashedSample<T> {
    pub action: Vec<T>,
    pub log_prob: T,
    /// Pre-squash value `mean + std * noise`.
    pub pre_tanh: Vec<T>,
    pub noise: Vec<T>,
    pub log_std: Vec<T>,
}

#[inline]
pub fn clamp_log_std<T: Scalar>(raw: T) -> T {
    raw.max(T::of(LOG_STD_MIN)).min(T::of(LOG_STD_MAX))
}

/// `ln(1 - tanh(u)^2)` evaluated without cancellation.
#[inline]
fn log1m_tanh_sq<T: Scalar>(u: T) -> T {
    // 2 (ln 2 - u - softplus(-2u))
    let two = T::of(2.0);
    let x = -two * u;
    let softplus = if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    };
    two * (T::of(std::f64::consts::LN_2) - u - softplus)
}

/// `action = tanh(mean + exp(log_std) * noise)` and its log-density,
/// including the tanh change-of-variables term.
pub fn sample_squashed_gaussian<T: Scalar>(
    mean: &[T],
    log_std_raw: &[T],
    noise: &[T],
) -> SquashedSample<T> {
    debug_assert_eq!(mean.len(), log_std_raw.len());
    debug_assert_eq!(mean.len(), noise.len());
    let mut action = Vec::with_capacity(mean.len());
    let mut pre_tanh = Vec::with_capacity(mean.len());
    let mut log_std = Vec::with_capacity(mean.len());
    let mut log_prob = T::zero();
    for ((&m, &ls_raw), &eps) in mean.iter().zip(log_std_raw).zip(noise) {
        let ls = clamp_log_std(ls_raw);
        let u = m + ls.exp() * eps;
        log_prob = log_prob - T::of(0.5) * eps * eps - ls - T::of(HALF_LN_2PI) - log1m_tanh_sq(u);
        let bound = T::of(ACTION_BOUND);
        action.push(u.tanh().max(-bound).min(bound));
        pre_tanh.push(u);
        log_std.push(ls);
    }
    SquashedSample {
        action,
        log_prob,
        pre_tanh,
        noise: noise.to_vec(),
        log_std,
    }
}

/// Deterministic action `tanh(mean)`.
pub fn deterministic_action<T: Scalar>(mean: &[T]) -> Vec<T> {
    mean.iter().map(|m| m.tanh()).collect()
}

/// Log-density of a given squashed action. `action` must lie in `(-1, 1)`.
pub fn squashed_log_prob<T: Scalar>(mean: &[T], log_std_raw: &[T], action: &[T]) -> T {
    let mut lp = T::zero();
    for ((&m, &ls_raw), &a) in mean.iter().zip(log_std_raw).zip(action) {
        let ls = clamp_log_std(ls_raw);
        let u = a.atanh();
        let z = (u - m) / ls.exp();
        lp = lp - T::of(0.5) * z * z - ls - T::of(HALF_LN_2PI) - log1m_tanh_sq(u);
    }
    lp
}

/// Chain rule through a [`SquashedSample`].
///
/// Given `dL/daction` and `dL/dlog_prob`, returns `(dL/dmean, dL/dlog_std_raw)`.
/// The raw log-std gradient is zero where the clamp is active.
pub fn squashed_backward<T: Scalar>(
    sample: &SquashedSample<T>,
    log_std_raw: &[T],
    d_action: &[T],
    d_log_prob: T,
) -> (Vec<T>, Vec<T>) {
    let two = T::of(2.0);
    let mut d_mean = Vec::with_capacity(sample.action.len());
    let mut d_log_std = Vec::with_capacity(sample.action.len());
    for j in 0..sample.action.len() {
        let a = sample.action[j];
        let du = d_action[j] * (T::one() - a * a) + d_log_prob * two * a;
        d_mean.push(du);
        let raw = log_std_raw[j];
        let active = raw > T::of(LOG_STD_MIN) && raw < T::of(LOG_STD_MAX);
        d_log_std.push(if active {
            du * sample.log_std[j].exp() * sample.noise[j] - d_log_prob
        } else {
            T::zero()
        });
    }
    (d_mean, d_log_std)
}
