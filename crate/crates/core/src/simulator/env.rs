use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::car::{advance, reset, ActionCmd, CarState, Termination, DEFAULT_DT};
use super::image::Observation;
use super::render::{render_observation, RenderParams};
use super::track::TrackSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvParams {
    pub dt: f64,
    /// Episodes are truncated (not terminated) after this many steps.
    pub max_episode_steps: u64,
    /// Std of Gaussian noise added to the normalized steering command.
    pub steer_noise: f64,
}

impl Default for EnvParams {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            max_episode_steps: 1200,
            steer_noise: 0.05,
        }
    }
}

impl EnvParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::param("dt must be positive"));
        }
        if self.max_episode_steps == 0 {
            return Err(Error::param("max_episode_steps must be at least 1"));
        }
        if !(self.steer_noise >= 0.0 && self.steer_noise.is_finite()) {
            return Err(Error::param("steer_noise must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Start {
    /// Fixed evaluation start at arc length zero.
    Fixed,
    /// Uniformly sampled start drawn from the seed.
    Random(u64),
}

#[derive(Debug, Clone)]
pub struct EnvStep {
    pub observation: Observation,
    pub reward: f64,
    pub terminated: Termination,
    /// Step cap reached without a terminal event.
    pub truncated: bool,
    /// The command actually applied (after clamping and actuation noise).
    pub applied: ActionCmd,
}

impl EnvStep {
    pub fn episode_over(&self) -> bool {
        self.terminated.is_done() || self.truncated
    }
}

/// One simulator instance: track, renderer and the car state.
#[derive(Debug, Clone)]
pub struct Env {
    track: TrackSpec,
    render: RenderParams,
    params: EnvParams,
    state: CarState,
    observation: Observation,
    noise_rng: ChaCha8Rng,
    done: bool,
}

impl Env {
    pub fn new(track: TrackSpec, render: RenderParams, params: EnvParams) -> Result<Self> {
        render.validate()?;
        params.validate()?;
        let state = reset(&track, None);
        let observation = render_observation(&track, &state, &render);
        Ok(Self {
            track,
            render,
            params,
            state,
            observation,
            noise_rng: ChaCha8Rng::seed_from_u64(0),
            done: false,
        })
    }

    pub fn track(&self) -> &TrackSpec {
        &self.track
    }

    pub fn render_params(&self) -> &RenderParams {
        &self.render
    }

    pub fn set_render_params(&mut self, render: RenderParams) -> Result<()> {
        render.validate()?;
        self.render = render;
        self.observation = render_observation(&self.track, &self.state, &self.render);
        Ok(())
    }

    pub fn params(&self) -> &EnvParams {
        &self.params
    }

    pub fn state(&self) -> &CarState {
        &self.state
    }

    pub fn observation(&self) -> &Observation {
        &self.observation
    }

    /// Start a new episode; `noise_seed` drives the actuation noise.
    pub fn reset(&mut self, start: Start, noise_seed: u64) -> &Observation {
        self.state = match start {
            Start::Fixed => reset(&self.track, None),
            Start::Random(seed) => reset(&self.track, Some(seed)),
        };
        self.noise_rng = ChaCha8Rng::seed_from_u64(noise_seed);
        self.done = false;
        self.observation = render_observation(&self.track, &self.state, &self.render);
        &self.observation
    }

    pub fn step(&mut self, action: ActionCmd) -> Result<EnvStep> {
        if self.done {
            return Err(Error::State("episode is over; call reset".into()));
        }
        if !action.is_finite() {
            return Err(Error::numeric("non-finite action"));
        }
        let mut applied = ActionCmd::new(action.steer_norm, action.speed_norm);
        if self.params.steer_noise > 0.0 {
            let n = Normal::new(0.0, self.params.steer_noise)
                .map_err(|e| Error::param(e.to_string()))?;
            applied = ActionCmd::new(
                applied.steer_norm + n.sample(&mut self.noise_rng),
                applied.speed_norm,
            );
        }
        let (next, reward, terminated) = advance(&self.track, &self.state, applied, self.params.dt)?;
        self.state = next;
        self.observation = render_observation(&self.track, &self.state, &self.render);
        let truncated = !terminated.is_done() && next.step_index >= self.params.max_episode_steps;
        self.done = terminated.is_done() || truncated;
        Ok(EnvStep {
            observation: self.observation.clone(),
            reward,
            terminated,
            truncated,
            applied,
        })
    }
}
