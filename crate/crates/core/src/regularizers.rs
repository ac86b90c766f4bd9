//! Temporal and spatial action-smoothness penalties with the IR adaptive weight.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{BackwardWants, Network, ParamSet, Scalar, Tensor, ACTION_DIM};
use crate::simulator::Observation;
use crate::transforms::{transform_similar_state, TransformSuite};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegMode {
    None,
    TemporalOnly,
    SpatialOnly,
    Both,
}

impl RegMode {
    pub fn temporal(self) -> bool {
        matches!(self, RegMode::TemporalOnly | RegMode::Both)
    }

    pub fn spatial(self) -> bool {
        matches!(self, RegMode::SpatialOnly | RegMode::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpatialSource {
    /// Additive per-pixel Gaussian noise with std `sigma`.
    Gaussian { sigma: f64 },
    /// One photometric or geometric transform per sample.
    Transform { photometric_prob: f64 },
}

/// Which speed feeds the IR weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IrSpeed {
    #[default]
    Commanded,
    Measured,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegConfig {
    pub lambda_t: f64,
    pub lambda_s: f64,
    pub mode: RegMode,
    pub spatial_source: SpatialSource,
    pub ir_control: bool,
    #[serde(default)]
    pub ir_speed: IrSpeed,
}

impl Default for RegConfig {
    fn default() -> Self {
        Self::none()
    }
}

impl RegConfig {
    pub fn none() -> Self {
        Self {
            lambda_t: 1.0,
            lambda_s: 5.0,
            mode: RegMode::None,
            spatial_source: SpatialSource::Transform {
                photometric_prob: 0.5,
            },
            ir_control: false,
            ir_speed: IrSpeed::Commanded,
        }
    }

    /// Temporal plus transform-based spatial smoothness, `lambda_T = 1`, `lambda_S = 5`.
    pub fn iras() -> Self {
        Self {
            mode: RegMode::Both,
            ..Self::none()
        }
    }

    pub fn iras_ir() -> Self {
        Self {
            ir_control: true,
            ..Self::iras()
        }
    }

    /// Gaussian state-noise variant.
    pub fn caps(sigma: f64) -> Self {
        Self {
            spatial_source: SpatialSource::Gaussian { sigma },
            ..Self::iras()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |key: &str, message: String| Error::Config {
            key: key.into(),
            message,
        };
        for (key, v) in [("lambda_t", self.lambda_t), ("lambda_s", self.lambda_s)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(cfg(key, format!("must be a non-negative number, got {v}")));
            }
        }
        match self.spatial_source {
            SpatialSource::Gaussian { sigma } if !(sigma > 0.0 && sigma.is_finite()) => {
                return Err(cfg("spatial_source.sigma", format!("must be positive, got {sigma}")))
            }
            SpatialSource::Transform { photometric_prob } if !(0.0..=1.0).contains(&photometric_prob) => {
                return Err(cfg(
                    "spatial_source.photometric_prob",
                    format!("must lie in [0, 1], got {photometric_prob}"),
                ))
            }
            _ => {}
        }
        Ok(())
    }

    fn temporal_active(&self) -> bool {
        self.mode.temporal() && self.lambda_t != 0.0
    }

    fn spatial_active(&self) -> bool {
        self.mode.spatial() && self.lambda_s != 0.0
    }

    /// Whether any penalty term contributes.
    pub fn active(&self) -> bool {
        self.temporal_active() || self.spatial_active()
    }
}

/// `sqrt(speed * reward)` for inputs in `[0, 1]`.
pub fn ir_weight(speed_norm01: f64, reward_norm01: f64) -> Result<f64> {
    for (name, v) in [("speed", speed_norm01), ("reward", reward_norm01)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::param(format!("normalized {name} must lie in [0, 1], got {v}")));
        }
    }
    Ok((speed_norm01 * reward_norm01).sqrt())
}

/// Per-pixel additive Gaussian noise, clamped to `[0, 1]`.
pub fn gaussian_similar_state<R: Rng + ?Sized>(
    img: &Observation,
    sigma: f64,
    rng: &mut R,
) -> Result<Observation> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::param(format!("sigma must be positive, got {sigma}")));
    }
    let normal = Normal::new(0.0f64, sigma).map_err(|e| Error::param(e.to_string()))?;
    let mut out = img.clone();
    for p in out.pixels_mut() {
        *p = ((*p as f64 + normal.sample(rng)) as f32).clamp(0.0, 1.0);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SmoothLossReport {
    /// Batch mean of the per-sample temporal distance.
    pub l_t: f64,
    /// Batch mean of the per-sample spatial distance.
    pub l_s: f64,
    pub lambda_ir_mean: f64,
    pub penalty_total: f64,
}

/// Penalty from per-sample distances. With `lambda_ir` the weight is applied
/// per sample before averaging; without it the result is
/// `lambda_T * mean(L_T) + lambda_S * mean(L_S)`.
pub fn combine_penalty(
    l_t: &[f64],
    l_s: &[f64],
    lambda_t: f64,
    lambda_s: f64,
    lambda_ir: Option<&[f64]>,
) -> Result<f64> {
    let n = l_t.len();
    if n == 0 || l_s.len() != n || lambda_ir.is_some_and(|w| w.len() != n) {
        return Err(Error::shape("penalty inputs must be non-empty and aligned"));
    }
    let total: f64 = (0..n)
        .map(|i| {
            let w = lambda_ir.map_or(1.0, |w| w[i]);
            w * (lambda_t * l_t[i] + lambda_s * l_s[i])
        })
        .sum();
    Ok(total / n as f64)
}

/// Euclidean distance between `tanh(a)` and `tanh(b)` over the first
/// `ACTION_DIM` columns, with gradients with respect to `a` and `b`.
fn squashed_distance<T: Scalar>(a: &[T], b: &[T]) -> (T, [T; ACTION_DIM], [T; ACTION_DIM]) {
    let mut diff = [T::zero(); ACTION_DIM];
    let mut ta = [T::zero(); ACTION_DIM];
    let mut tb = [T::zero(); ACTION_DIM];
    let mut sq = T::zero();
    for j in 0..ACTION_DIM {
        ta[j] = a[j].tanh();
        tb[j] = b[j].tanh();
        diff[j] = ta[j] - tb[j];
        sq = sq + diff[j] * diff[j];
    }
    let d = sq.sqrt();
    let mut ga = [T::zero(); ACTION_DIM];
    let mut gb = [T::zero(); ACTION_DIM];
    if d > T::zero() {
        for j in 0..ACTION_DIM {
            let g = diff[j] / d;
            ga[j] = g * (T::one() - ta[j] * ta[j]);
            gb[j] = -g * (T::one() - tb[j] * tb[j]);
        }
    }
    (d, ga, gb)
}

fn per_sample_distance<T: Scalar>(out_a: &Tensor<T>, out_b: &Tensor<T>) -> Result<Vec<f64>> {
    if out_a.shape() != out_b.shape() {
        return Err(Error::shape(format!(
            "policy outputs differ in shape: {:?} vs {:?}",
            out_a.shape(),
            out_b.shape()
        )));
    }
    Ok((0..out_a.rows())
        .map(|i| squashed_distance(out_a.row(i), out_b.row(i)).0.as_f64())
        .collect())
}

fn policy_out<T: Scalar>(policy: &Network<T>, batch: &Tensor<T>) -> Result<Tensor<T>> {
    Ok(policy.forward(batch, None)?.0)
}

/// Per-sample `||mu(s_t) - mu(s_{t+1})||` on the deterministic actions.
pub fn temporal_loss<T: Scalar>(
    policy: &Network<T>,
    s_t: &Tensor<T>,
    s_next: &Tensor<T>,
) -> Result<Vec<f64>> {
    if s_t.shape() != s_next.shape() {
        return Err(Error::shape("temporal_loss: batches are not aligned"));
    }
    per_sample_distance(&policy_out(policy, s_t)?, &policy_out(policy, s_next)?)
}

/// Per-sample `||mu(s_t) - mu(s'_t)||` on the deterministic actions.
pub fn spatial_loss<T: Scalar>(
    policy: &Network<T>,
    s_t: &Tensor<T>,
    s_similar: &Tensor<T>,
) -> Result<Vec<f64>> {
    if s_t.shape() != s_similar.shape() {
        return Err(Error::shape("spatial_loss: batches are not aligned"));
    }
    per_sample_distance(&policy_out(policy, s_t)?, &policy_out(policy, s_similar)?)
}

/// Inputs the penalty needs from a sampled batch.
#[derive(Debug, Clone, Copy)]
pub struct RegBatch<'a, T> {
    /// `N×C×H×W` observations at time t.
    pub obs: &'a Tensor<T>,
    pub next_obs: &'a Tensor<T>,
    pub done: &'a [bool],
    pub speed01: &'a [f64],
    pub reward01: &'a [f64],
}

impl<T: Scalar> RegBatch<'_, T> {
    fn validate(&self) -> Result<usize> {
        let n = self.obs.rows();
        if n == 0 {
            return Err(Error::shape("regularizer batch is empty"));
        }
        if self.next_obs.shape() != self.obs.shape()
            || self.done.len() != n
            || self.speed01.len() != n
            || self.reward01.len() != n
        {
            return Err(Error::shape("regularizer batch fields are not aligned"));
        }
        Ok(n)
    }
}

/// Build `s'_t` for every sample of `obs` (`N×1×H×W`).
pub fn similar_states<T: Scalar, R: Rng + ?Sized>(
    obs: &Tensor<T>,
    source: SpatialSource,
    suite: &TransformSuite,
    rng: &mut R,
) -> Result<Tensor<T>> {
    let shape = obs.shape().to_vec();
    if shape.len() != 4 || shape[1] != 1 {
        return Err(Error::shape(format!(
            "similar states need N×1×H×W observations, got {shape:?}"
        )));
    }
    let (h, w) = (shape[2], shape[3]);
    let mut values = Vec::with_capacity(obs.len());
    for i in 0..obs.rows() {
        let img = Observation::new(w, h, obs.row(i).iter().map(|v| v.as_f64() as f32).collect())?;
        let out = match source {
            SpatialSource::Gaussian { sigma } => gaussian_similar_state(&img, sigma, rng)?,
            SpatialSource::Transform { photometric_prob } => {
                transform_similar_state(&img, suite, photometric_prob, rng)?.0
            }
        };
        values.extend(out.pixels().iter().map(|&p| T::of(p as f64)));
    }
    Tensor::new(shape, values)
}

/// Penalty value plus its gradient pieces.
#[derive(Debug, Clone)]
pub struct PenaltyOutput<T> {
    pub report: SmoothLossReport,
    /// Gradient with respect to the policy output at `s_t` (`N×out`); the
    /// caller folds it into its own backward pass through `s_t`.
    pub d_out_t: Option<Tensor<T>>,
    /// Parameter gradient from the `s_{t+1}` and `s'_t` passes.
    pub param_grad: Option<ParamSet<T>>,
}

/// Assemble the smoothness penalty for one batch.
///
/// `out_t` is the policy output at `batch.obs`, already computed by the
/// caller. Terminal transitions contribute zero temporal distance but still
/// count in the batch mean.
pub fn assemble_penalty<T: Scalar, R: Rng + ?Sized>(
    policy: &Network<T>,
    out_t: &Tensor<T>,
    batch: &RegBatch<'_, T>,
    cfg: &RegConfig,
    suite: &TransformSuite,
    rng: &mut R,
) -> Result<PenaltyOutput<T>> {
    cfg.validate()?;
    let n = batch.validate()?;
    let width = policy.spec().output_width();
    out_t.check_shape(&[n, width], "policy output at s_t")?;
    if !cfg.active() {
        return Ok(PenaltyOutput {
            report: SmoothLossReport::default(),
            d_out_t: None,
            param_grad: None,
        });
    }
    if cfg.spatial_active()
        && matches!(cfg.spatial_source, SpatialSource::Transform { .. })
        && suite.is_empty()
    {
        return Err(Error::Config {
            key: "transforms".into(),
            message: "spatial smoothness with transforms needs a non-empty suite".into(),
        });
    }

    let lambda_ir: Option<Vec<f64>> = if cfg.ir_control {
        Some(
            batch
                .speed01
                .iter()
                .zip(batch.reward01)
                .map(|(&s, &r)| ir_weight(s, r))
                .collect::<Result<_>>()?,
        )
    } else {
        None
    };
    let weight = |i: usize| lambda_ir.as_ref().map_or(1.0, |w| w[i]);
    let inv_n = 1.0 / n as f64;

    let mut d_out_t = Tensor::<T>::zeros(vec![n, width]);
    let mut grads: Vec<ParamSet<T>> = Vec::new();
    let mut l_t = vec![0.0; n];
    let mut l_s = vec![0.0; n];

    if cfg.temporal_active() {
        let (out_next, cache) = policy.forward(batch.next_obs, None)?;
        let mut d_next = Tensor::<T>::zeros(vec![n, width]);
        for i in 0..n {
            if batch.done[i] {
                continue;
            }
            let (d, ga, gb) = squashed_distance(out_t.row(i), out_next.row(i));
            l_t[i] = d.as_f64();
            let scale = T::of(weight(i) * cfg.lambda_t * inv_n);
            for j in 0..ACTION_DIM {
                d_out_t.row_mut(i)[j] = d_out_t.row(i)[j] + scale * ga[j];
                d_next.row_mut(i)[j] = scale * gb[j];
            }
        }
        let g = policy.backward(&cache, &d_next, BackwardWants::PARAMS)?;
        grads.extend(g.params);
    }

    if cfg.spatial_active() {
        let similar = similar_states(batch.obs, cfg.spatial_source, suite, rng)?;
        let (out_sim, cache) = policy.forward(&similar, None)?;
        let mut d_sim = Tensor::<T>::zeros(vec![n, width]);
        for i in 0..n {
            let (d, ga, gb) = squashed_distance(out_t.row(i), out_sim.row(i));
            l_s[i] = d.as_f64();
            let scale = T::of(weight(i) * cfg.lambda_s * inv_n);
            for j in 0..ACTION_DIM {
                d_out_t.row_mut(i)[j] = d_out_t.row(i)[j] + scale * ga[j];
                d_sim.row_mut(i)[j] = scale * gb[j];
            }
        }
        let g = policy.backward(&cache, &d_sim, BackwardWants::PARAMS)?;
        grads.extend(g.params);
    }

    let lt = if cfg.temporal_active() { cfg.lambda_t } else { 0.0 };
    let ls = if cfg.spatial_active() { cfg.lambda_s } else { 0.0 };
    let penalty_total = combine_penalty(&l_t, &l_s, lt, ls, lambda_ir.as_deref())?;
    let report = SmoothLossReport {
        l_t: l_t.iter().sum::<f64>() * inv_n,
        l_s: l_s.iter().sum::<f64>() * inv_n,
        lambda_ir_mean: lambda_ir
            .as_ref()
            .map_or(1.0, |w| w.iter().sum::<f64>() * inv_n),
        penalty_total,
    };
    Ok(PenaltyOutput {
        report,
        d_out_t: Some(d_out_t),
        param_grad: Some(ParamSet::sum_ordered(grads)?),
    })
}

/// Penalty and its full parameter gradient, running the `s_t` pass here.
pub fn penalty_with_grad<T: Scalar, R: Rng + ?Sized>(
    policy: &Network<T>,
    batch: &RegBatch<'_, T>,
    cfg: &RegConfig,
    suite: &TransformSuite,
    rng: &mut R,
) -> Result<(SmoothLossReport, ParamSet<T>)> {
    let (out_t, cache) = policy.forward(batch.obs, None)?;
    let out = assemble_penalty(policy, &out_t, batch, cfg, suite, rng)?;
    let mut grad = ParamSet::zeros_like(policy.params());
    if let Some(d) = &out.d_out_t {
        let g = policy.backward(&cache, d, BackwardWants::PARAMS)?;
        grad = g.params.expect("requested params");
    }
    if let Some(extra) = &out.param_grad {
        grad.add_scaled(extra, T::one())?;
    }
    Ok((out.report, grad))
}
