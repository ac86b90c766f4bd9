use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::buffer::{ReplayBuffer, Transition};
use super::config::SacConfig;
use super::learner::{Learner, UpdateStats};
use super::update::Batch;
use crate::error::{Error, Result};
use crate::metrics::{evaluate_policy, measured_speed01, EvalReport};
use crate::nn::policy::sample_squashed_gaussian;
use crate::nn::{Checkpoint, InputShape, Tensor, ACTION_DIM};
use crate::parallel;
use crate::regularizers::RegConfig;
use crate::simulator::{ActionCmd, Env, Observation, Start, Termination};
use crate::transforms::{rand_conv_with_kernel, sample_kernel, TransformSuite};

pub const TRAINING_LOG_HEADER: &str =
    "step,critic_loss,actor_loss,alpha,mean_L_T,mean_L_S,mean_lambda_IR,eval_return,eval_success";

/// Independent random streams derived from the run seed.
mod stream {
    pub const INIT: u64 = 0;
    pub const LEARNER: u64 = 1;
    pub const REGULARIZER: u64 = 2;
    pub const AUGMENT: u64 = 3;
    pub const EVAL: u64 = 4;
    pub const WORKER_ACTIONS: u64 = 100;
    pub const WORKER_RESETS: u64 = 10_000;
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub sac: SacConfig,
    pub reg: RegConfig,
    /// Similar-state transforms; its parameters also hold the random
    /// convolution kernel sizes.
    pub suite: TransformSuite,
    pub seed: u64,
    /// Environment steps summed over workers.
    pub total_steps: u64,
    /// Evaluate every this many environment steps (0 disables).
    pub eval_every: u64,
    pub n_eval_runs: usize,
    pub log_every: u64,
    pub config_hash: String,
    pub compat_hash: String,
}

/// One row of the training CSV. Means cover the updates since the previous row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub step: u64,
    pub updates: u64,
    pub critic_loss: Option<f64>,
    pub actor_loss: Option<f64>,
    pub alpha: f64,
    pub mean_l_t: Option<f64>,
    pub mean_l_s: Option<f64>,
    pub mean_lambda_ir: Option<f64>,
    pub eval_return: Option<f64>,
    pub eval_success: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub rows: Vec<LogRow>,
}

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let f = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        let mut out = format!("{TRAINING_LOG_HEADER}\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.step,
                f(r.critic_loss),
                f(r.actor_loss),
                r.alpha,
                f(r.mean_l_t),
                f(r.mean_l_s),
                f(r.mean_lambda_ir),
                f(r.eval_return),
                f(r.eval_success)
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainStatus {
    Completed,
    /// Stopped on a numeric failure; the checkpoint is the state at that point.
    Aborted { step: u64, reason: String },
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub log: TrainingLog,
    pub status: TrainStatus,
    pub last_eval: Option<EvalReport>,
}

struct Worker {
    env: Env,
    local: Vec<Transition>,
    act_rng: ChaCha8Rng,
    reset_rng: ChaCha8Rng,
    obs: Arc<Observation>,
    pending: ActionCmd,
}

impl Worker {
    fn restart(&mut self) {
        let start = Start::Random(self.reset_rng.next_u64());
        let noise = self.reset_rng.next_u64();
        self.obs = Arc::new(self.env.reset(start, noise).clone());
    }
}

#[derive(Default)]
struct StatAccumulator {
    sum: UpdateStats,
    count: u64,
}

impl StatAccumulator {
    fn add(&mut self, s: &UpdateStats) {
        self.sum.critic_loss += s.critic_loss;
        self.sum.actor_loss += s.actor_loss;
        self.sum.l_t += s.l_t;
        self.sum.l_s += s.l_s;
        self.sum.lambda_ir += s.lambda_ir;
        self.count += 1;
    }

    fn take(&mut self) -> Option<UpdateStats> {
        if self.count == 0 {
            return None;
        }
        let n = self.count as f64;
        let out = UpdateStats {
            critic_loss: self.sum.critic_loss / n,
            actor_loss: self.sum.actor_loss / n,
            alpha: 0.0,
            l_t: self.sum.l_t / n,
            l_s: self.sum.l_s / n,
            lambda_ir: self.sum.lambda_ir / n,
        };
        *self = Self::default();
        Some(out)
    }
}

/// Apply one random convolution per selected transition, shared by `s` and `s'`.
fn augment<R: Rng + ?Sized>(
    items: Vec<&Transition>,
    prob: f64,
    kernels: &[usize],
    rng: &mut R,
) -> Result<Vec<Transition>> {
    items
        .into_iter()
        .map(|t| {
            let mut t = t.clone();
            if prob > 0.0 && rng.random_bool(prob) {
                let (k, w) = sample_kernel(rng, kernels)?;
                t.obs = Arc::new(rand_conv_with_kernel(&t.obs, &w, k)?);
                t.next_obs = Arc::new(rand_conv_with_kernel(&t.next_obs, &w, k)?);
            }
            Ok(t)
        })
        .collect()
}

fn crossed(prev: u64, now: u64, every: u64) -> bool {
    every > 0 && now / every > prev / every
}

/// Soft actor-critic training with `sac.workers` rollout workers feeding a
/// single learner.
///
/// Workers step in lockstep; their transitions go to per-worker local
/// buffers that are flushed into the global replay buffer in worker order
/// at episode end or when full. The outcome is therefore identical for any
/// thread count.
pub fn train(
    env_factory: &dyn Fn() -> Result<Env>,
    opts: &TrainOptions,
    mut on_row: Option<&mut dyn FnMut(&LogRow)>,
) -> Result<TrainOutcome> {
    let sac = opts.sac;
    sac.validate()?;
    opts.reg.validate()?;
    opts.suite.params.validate()?;
    if opts.log_every == 0 {
        return Err(Error::param("log_every must be at least 1"));
    }
    let eval_env = env_factory()?;
    let render = *eval_env.render_params();
    let input = InputShape {
        channels: 1,
        height: render.height,
        width: render.width,
    };
    let mut learner = Learner::new(
        input,
        sac,
        opts.reg,
        opts.suite.clone(),
        &mut stream_rng(opts.seed, stream::INIT),
    )?;
    let mut log = TrainingLog::default();
    let finish = |learner: &Learner, step, log, status, last_eval| TrainOutcome {
        checkpoint: learner.checkpoint(step, &opts.config_hash, &opts.compat_hash),
        log,
        status,
        last_eval,
    };
    if opts.total_steps == 0 {
        return Ok(finish(&learner, 0, log, TrainStatus::Completed, None));
    }

    let mut workers = (0..sac.workers)
        .map(|w| {
            let mut worker = Worker {
                env: env_factory()?,
                local: Vec::with_capacity(sac.local_buffer.min(4096)),
                act_rng: stream_rng(opts.seed, stream::WORKER_ACTIONS + w as u64),
                reset_rng: stream_rng(opts.seed, stream::WORKER_RESETS + w as u64),
                obs: Arc::new(Observation::filled(1, 1, 0.0)),
                pending: ActionCmd::default(),
            };
            worker.restart();
            Ok(worker)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut global = ReplayBuffer::new(sac.global_buffer)?;
    let mut learn_rng = stream_rng(opts.seed, stream::LEARNER);
    let mut reg_rng = stream_rng(opts.seed, stream::REGULARIZER);
    let mut aug_rng = stream_rng(opts.seed, stream::AUGMENT);
    let eval_seed = stream_rng(opts.seed, stream::EVAL).next_u64();
    let kernels = opts.suite.params.randconv_kernels.clone();
    let mut acc = StatAccumulator::default();
    let mut last_eval = None;
    let mut step = 0u64;

    while step < opts.total_steps {
        let active = ((opts.total_steps - step) as usize).min(workers.len());
        if step < sac.warmup_steps {
            for w in &mut workers[..active] {
                let steer = w.act_rng.random_range(-1.0..=1.0);
                let speed = w.act_rng.random_range(-1.0..=1.0);
                w.pending = ActionCmd::new(steer, speed);
            }
        } else {
            let (h, wd) = (input.height, input.width);
            let mut pix = Vec::with_capacity(active * h * wd);
            for w in &workers[..active] {
                pix.extend_from_slice(w.obs.pixels());
            }
            let (out, _) = learner
                .policy
                .forward(&Tensor::new(vec![active, 1, h, wd], pix)?, None)?;
            for (i, w) in workers[..active].iter_mut().enumerate() {
                let row = out.row(i);
                let noise: Vec<f32> = (0..ACTION_DIM)
                    .map(|_| w.act_rng.sample::<f32, _>(StandardNormal))
                    .collect();
                let s = sample_squashed_gaussian(
                    &row[..ACTION_DIM],
                    &row[ACTION_DIM..2 * ACTION_DIM],
                    &noise,
                );
                w.pending = ActionCmd::new(s.action[0] as f64, s.action[1] as f64);
            }
        }

        let results =
            parallel::map_slice_mut(&mut workers[..active], |_, w| w.env.step(w.pending));
        for (w, res) in workers[..active].iter_mut().zip(results) {
            let out = res?;
            let next = Arc::new(out.observation.clone());
            let done = matches!(
                out.terminated,
                Termination::OffTrack | Termination::WrongDirection
            );
            w.local.push(Transition {
                obs: w.obs.clone(),
                action: [w.pending.steer_norm as f32, w.pending.speed_norm as f32],
                reward: out.reward as f32,
                next_obs: next.clone(),
                done,
                speed_norm01: w.pending.speed01() as f32,
                measured_speed01: measured_speed01(w.env.state().speed) as f32,
                reward_norm01: out.reward as f32,
            });
            if out.episode_over() || w.local.len() >= sac.local_buffer {
                for t in w.local.drain(..) {
                    global.push(t);
                }
            }
            if out.episode_over() {
                w.restart();
            } else {
                w.obs = next;
            }
        }
        let prev = step;
        step += active as u64;

        if step >= sac.warmup_steps && global.len() >= sac.batch_size {
            for _ in 0..sac.updates_per_step * active {
                let items = global.sample(sac.batch_size, &mut learn_rng)?;
                let items = augment(items, sac.randconv_prob, &kernels, &mut aug_rng)?;
                let refs: Vec<&Transition> = items.iter().collect();
                let batch = Batch::<f32>::from_transitions(&refs, opts.reg.ir_speed)?;
                match learner.update(&batch, &mut learn_rng, &mut reg_rng) {
                    Ok(s) => acc.add(&s),
                    Err(Error::Numeric(reason)) => {
                        let status = TrainStatus::Aborted { step, reason };
                        return Ok(finish(&learner, step, log, status, last_eval));
                    }
                    Err(e) => return Err(e),
                }
            }
        }

        let do_eval = crossed(prev, step, opts.eval_every) && opts.n_eval_runs > 0;
        let do_log = crossed(prev, step, opts.log_every) || do_eval || step == opts.total_steps;
        if do_log {
            let (eval_return, eval_success) = if do_eval {
                let (report, _) =
                    evaluate_policy(&learner.policy, &eval_env, opts.n_eval_runs, eval_seed)?;
                let pair = (Some(report.mean_return), Some(report.success_rate));
                last_eval = Some(report);
                pair
            } else {
                (None, None)
            };
            let stats = acc.take();
            let row = LogRow {
                step,
                updates: learner.updates(),
                critic_loss: stats.map(|s| s.critic_loss),
                actor_loss: stats.map(|s| s.actor_loss),
                alpha: learner.alpha(),
                mean_l_t: stats.map(|s| s.l_t),
                mean_l_s: stats.map(|s| s.l_s),
                mean_lambda_ir: stats.map(|s| s.lambda_ir),
                eval_return,
                eval_success,
            };
            if let Some(cb) = on_row.as_mut() {
                cb(&row);
            }
            log.rows.push(row);
        }
    }
    Ok(finish(&learner, step, log, TrainStatus::Completed, last_eval))
}
