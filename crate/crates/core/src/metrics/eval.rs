use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::log::{ActionLog, ActionRecord};
use super::spectrum::smoothness;
use crate::error::{Error, Result};
use crate::nn::{Network, Tensor, ACTION_DIM};
use crate::parallel;
use crate::simulator::{ActionCmd, Env, Observation, Start, Termination, V_MAX};

/// Chooses the command for each control step.
pub trait Driver: Sync {
    fn act(&self, obs: &Observation, step: u64, episode: u64) -> Result<ActionCmd>;
}

/// Deterministic policy: the squashed mean action.
pub struct PolicyDriver<'a>(pub &'a Network<f32>);

impl Driver for PolicyDriver<'_> {
    fn act(&self, obs: &Observation, _step: u64, _episode: u64) -> Result<ActionCmd> {
        let input = Tensor::new(
            vec![1, 1, obs.height(), obs.width()],
            obs.pixels().to_vec(),
        )?;
        let (out, _) = self.0.forward(&input, None)?;
        let m = &out.row(0)[..ACTION_DIM];
        Ok(ActionCmd::new(m[0].tanh() as f64, m[1].tanh() as f64))
    }
}

/// Uniformly random commands, reproducible per `(seed, episode, step)`.
pub struct RandomDriver(pub u64);

impl Driver for RandomDriver {
    fn act(&self, _obs: &Observation, step: u64, episode: u64) -> Result<ActionCmd> {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(self.0, episode, step));
        Ok(ActionCmd::new(
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
        ))
    }
}

/// Any closure of `(observation, step)`.
pub struct FnDriver<F>(pub F);

impl<F> Driver for FnDriver<F>
where
    F: Fn(&Observation, u64) -> ActionCmd + Sync,
{
    fn act(&self, obs: &Observation, step: u64, _episode: u64) -> Result<ActionCmd> {
        Ok((self.0)(obs, step))
    }
}

/// Perturbation applied to every observation before the driver sees it.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObsShift {
    pub brightness: f32,
    /// Std of additive per-pixel Gaussian noise.
    pub noise_sigma: f32,
    /// Replace each pixel `p` with `1 - p` (after brightness and noise).
    pub invert: bool,
}

impl ObsShift {
    /// Brightness +0.2 with noise std 0.05.
    pub fn intensity() -> Self {
        Self {
            brightness: 0.2,
            noise_sigma: 0.05,
            invert: false,
        }
    }

    pub fn inversion() -> Self {
        Self {
            invert: true,
            ..Self::default()
        }
    }

    pub fn is_identity(&self) -> bool {
        self.brightness == 0.0 && self.noise_sigma == 0.0 && !self.invert
    }

    pub fn apply<R: Rng + ?Sized>(&self, img: &Observation, rng: &mut R) -> Result<Observation> {
        if self.is_identity() {
            return Ok(img.clone());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::param("shift noise_sigma must be non-negative"));
        }
        let noise = Normal::new(0.0f32, self.noise_sigma.max(f32::MIN_POSITIVE))
            .map_err(|e| Error::param(e.to_string()))?;
        let mut out = img.clone();
        for p in out.pixels_mut() {
            let mut v = *p + self.brightness;
            if self.noise_sigma > 0.0 {
                v += noise.sample(rng);
            }
            v = v.clamp(0.0, 1.0);
            *p = if self.invert { 1.0 - v } else { v };
        }
        Ok(out)
    }
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut x = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    x ^= x >> 31;
    x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x ^ (x >> 29)
}

/// Per-episode outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub episode: u64,
    pub steps: u64,
    pub termination: String,
    pub completed: bool,
    pub lap_time: Option<f64>,
    pub total_return: f64,
    pub mean_speed: f64,
    pub steering_sm: Option<f64>,
    pub speed_sm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub runs: usize,
    pub completed: usize,
    pub failed: usize,
    /// Fraction of runs that completed a lap, in `[0, 1]`.
    pub success_rate: f64,
    pub lap_time_mean: Option<f64>,
    pub lap_time_std: Option<f64>,
    /// Measured speed averaged over completed runs.
    pub avg_speed: Option<f64>,
    /// Mean per-episode steering smoothness over completed runs.
    pub steering_sm: Option<f64>,
    pub speed_sm: Option<f64>,
    /// Mean per-episode steering smoothness over every run with two or more steps.
    pub steering_sm_all: Option<f64>,
    /// Mean absolute step-to-step steering change over all runs.
    pub mean_abs_dsteer: f64,
    pub mean_return: f64,
    pub off_track: usize,
    pub wrong_direction: usize,
    pub truncated: usize,
    pub episodes: Vec<EpisodeSummary>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Sample standard deviation; zero for a single value.
fn std_dev(v: &[f64]) -> Option<f64> {
    let m = mean(v)?;
    if v.len() < 2 {
        return Some(0.0);
    }
    Some((v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt())
}

impl EvalReport {
    pub fn from_episodes(episodes: Vec<EpisodeSummary>, mean_abs_dsteer: f64) -> Self {
        let runs = episodes.len();
        let done: Vec<&EpisodeSummary> = episodes.iter().filter(|e| e.completed).collect();
        let laps: Vec<f64> = done.iter().filter_map(|e| e.lap_time).collect();
        let count = |t: &str| episodes.iter().filter(|e| e.termination == t).count();
        Self {
            runs,
            completed: done.len(),
            failed: runs - done.len(),
            success_rate: if runs == 0 {
                0.0
            } else {
                done.len() as f64 / runs as f64
            },
            lap_time_mean: mean(&laps),
            lap_time_std: std_dev(&laps),
            avg_speed: mean(&done.iter().map(|e| e.mean_speed).collect::<Vec<_>>()),
            steering_sm: mean(&done.iter().filter_map(|e| e.steering_sm).collect::<Vec<_>>()),
            speed_sm: mean(&done.iter().filter_map(|e| e.speed_sm).collect::<Vec<_>>()),
            steering_sm_all: mean(&episodes.iter().filter_map(|e| e.steering_sm).collect::<Vec<_>>()),
            mean_abs_dsteer,
            mean_return: mean(&episodes.iter().map(|e| e.total_return).collect::<Vec<_>>())
                .unwrap_or(0.0),
            off_track: count(Termination::OffTrack.as_str()),
            wrong_direction: count(Termination::WrongDirection.as_str()),
            truncated: count("truncated"),
            episodes,
        }
    }

    /// `key: value` lines; absent statistics print as `n/a`.
    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.6}"));
        let mut s = String::new();
        let _ = writeln!(s, "runs: {}", self.runs);
        let _ = writeln!(s, "completed: {}", self.completed);
        let _ = writeln!(s, "failed: {}", self.failed);
        let _ = writeln!(s, "success_rate_pct: {:.2}", 100.0 * self.success_rate);
        let _ = writeln!(s, "lap_time_mean_s: {}", opt(self.lap_time_mean));
        let _ = writeln!(s, "lap_time_std_s: {}", opt(self.lap_time_std));
        let _ = writeln!(s, "avg_speed_mps: {}", opt(self.avg_speed));
        let _ = writeln!(s, "steering_sm: {}", opt(self.steering_sm));
        let _ = writeln!(s, "speed_sm: {}", opt(self.speed_sm));
        let _ = writeln!(s, "steering_sm_all_runs: {}", opt(self.steering_sm_all));
        let _ = writeln!(s, "mean_abs_dsteer: {:.6}", self.mean_abs_dsteer);
        let _ = writeln!(s, "mean_return: {:.6}", self.mean_return);
        let _ = writeln!(s, "off_track: {}", self.off_track);
        let _ = writeln!(s, "wrong_direction: {}", self.wrong_direction);
        let _ = writeln!(s, "truncated: {}", self.truncated);
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is plain data")
    }
}

struct EpisodeRun {
    summary: EpisodeSummary,
    records: Vec<ActionRecord>,
    dsteer_sum: f64,
    dsteer_count: usize,
}

fn run_episode(
    driver: &dyn Driver,
    template: &Env,
    episode: u64,
    seed: u64,
    shift: Option<&ObsShift>,
) -> Result<EpisodeRun> {
    let mut env = template.clone();
    env.reset(Start::Fixed, mix(seed, episode, 0));
    let mut shift_rng = ChaCha8Rng::seed_from_u64(mix(seed, episode, 1));
    let dt = env.params().dt;
    let length = env.track().length();
    let mut obs = env.observation().clone();
    let mut records = Vec::new();
    let mut total_return = 0.0;
    let mut speed_sum = 0.0;
    let (mut dsteer_sum, mut dsteer_count) = (0.0, 0usize);
    let mut prev_steer: Option<f64> = None;
    let mut termination = "running".to_string();
    for step in 0.. {
        let seen = match shift {
            Some(s) => s.apply(&obs, &mut shift_rng)?,
            None => obs,
        };
        let cmd = driver.act(&seen, step, episode)?;
        let out = env.step(cmd)?;
        total_return += out.reward;
        speed_sum += env.state().speed;
        if let Some(p) = prev_steer {
            dsteer_sum += (cmd.steer_norm - p).abs();
            dsteer_count += 1;
        }
        prev_steer = Some(cmd.steer_norm);
        let status = if out.terminated.is_done() {
            out.terminated.as_str()
        } else if out.truncated {
            "truncated"
        } else {
            "running"
        };
        records.push(ActionRecord {
            step,
            episode,
            steer: cmd.steer_norm,
            speed: cmd.speed_norm,
            reward: out.reward,
            progress: env.state().distance_along / length,
            terminated: status.to_string(),
        });
        if out.episode_over() {
            termination = status.to_string();
            break;
        }
        obs = out.observation;
    }
    let steps = records.len() as u64;
    let completed = termination == Termination::LapComplete.as_str();
    let sm = |f: fn(&ActionRecord) -> f64| -> Result<Option<f64>> {
        if records.len() < 2 {
            return Ok(None);
        }
        let sig: Vec<f64> = records.iter().map(f).collect();
        Ok(Some(smoothness(&sig, 1.0 / dt)?))
    };
    let summary = EpisodeSummary {
        episode,
        steps,
        completed,
        lap_time: completed.then(|| steps as f64 * dt),
        total_return,
        mean_speed: speed_sum / steps.max(1) as f64,
        steering_sm: sm(|r| r.steer)?,
        speed_sm: sm(|r| r.speed)?,
        termination,
    };
    Ok(EpisodeRun {
        summary,
        records,
        dsteer_sum,
        dsteer_count,
    })
}

/// Run `n_runs` episodes from the fixed start. Episodes run in parallel and
/// are merged by index, so results do not depend on the thread count.
pub fn evaluate(
    driver: &dyn Driver,
    env: &Env,
    n_runs: usize,
    seed: u64,
    shift: Option<&ObsShift>,
) -> Result<(EvalReport, ActionLog)> {
    if n_runs == 0 {
        return Err(Error::param("n_runs must be at least 1"));
    }
    let runs = parallel::map_range(n_runs, |i| run_episode(driver, env, i as u64, seed, shift));
    let mut log = ActionLog::new(1.0 / env.params().dt);
    let mut summaries = Vec::with_capacity(n_runs);
    let (mut ds, mut dc) = (0.0, 0usize);
    for r in runs {
        let r = r?;
        log.records.extend(r.records);
        summaries.push(r.summary);
        ds += r.dsteer_sum;
        dc += r.dsteer_count;
    }
    let dsteer = if dc == 0 { 0.0 } else { ds / dc as f64 };
    Ok((EvalReport::from_episodes(summaries, dsteer), log))
}

/// Deterministic-policy evaluation of a trained network.
pub fn evaluate_policy(
    policy: &Network<f32>,
    env: &Env,
    n_runs: usize,
    seed: u64,
) -> Result<(EvalReport, ActionLog)> {
    evaluate(&PolicyDriver(policy), env, n_runs, seed, None)
}

/// Same aggregation under a perturbed observation stream.
pub fn domain_shift_evaluate(
    policy: &Network<f32>,
    env: &Env,
    n_runs: usize,
    seed: u64,
    shift: &ObsShift,
) -> Result<EvalReport> {
    Ok(evaluate(&PolicyDriver(policy), env, n_runs, seed, Some(shift))?.0)
}

/// Normalized measured speed, as used by the IR weight.
pub fn measured_speed01(speed: f64) -> f64 {
    (speed / V_MAX).clamp(0.0, 1.0)
}
