use serde::{Deserialize, Serialize};

use super::track::{TrackSpec, Vec2};
use crate::error::{Error, Result};

pub const WHEELBASE: f64 = 0.16;
pub const MAX_STEER_DEG: f64 = 30.0;
pub const SPEED_LAG: f64 = 0.3;
pub const V_MIN: f64 = 0.0;
pub const V_MAX: f64 = 4.0;
pub const DEFAULT_DT: f64 = 1.0 / 30.0;
pub const START_SPEED: f64 = 1.0;
/// Consecutive steps with heading more than 90° off the tangent before
/// the episode ends as wrong-direction.
pub const WRONG_WAY_STEPS: u32 = 10;

/// Normalized steering and speed command.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ActionCmd {
    pub steer_norm: f64,
    pub speed_norm: f64,
}

impl ActionCmd {
    /// Components are clamped to `[-1, 1]`. NaN is kept so `step` can reject it.
    pub fn new(steer_norm: f64, speed_norm: f64) -> Self {
        Self {
            steer_norm: clamp_unit(steer_norm),
            speed_norm: clamp_unit(speed_norm),
        }
    }

    pub fn steer_angle(&self) -> f64 {
        clamp_unit(self.steer_norm) * MAX_STEER_DEG.to_radians()
    }

    pub fn target_speed(&self) -> f64 {
        2.5 + 1.5 * clamp_unit(self.speed_norm)
    }

    /// Speed command mapped to `[0, 1]`.
    pub fn speed01(&self) -> f64 {
        (clamp_unit(self.speed_norm) + 1.0) / 2.0
    }

    pub fn is_finite(&self) -> bool {
        self.steer_norm.is_finite() && self.speed_norm.is_finite()
    }
}

fn clamp_unit(v: f64) -> f64 {
    if v.is_nan() {
        v
    } else {
        v.clamp(-1.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Running,
    OffTrack,
    WrongDirection,
    LapComplete,
}

impl Termination {
    pub fn is_done(self) -> bool {
        self != Termination::Running
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Running => "running",
            Termination::OffTrack => "off_track",
            Termination::WrongDirection => "wrong_direction",
            Termination::LapComplete => "lap_complete",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarState {
    pub position: Vec2,
    pub heading: f64,
    pub speed: f64,
    pub progress_s: f64,
    pub lap_fraction: f64,
    pub step_index: u64,
    /// Signed arc length covered since reset.
    pub distance_along: f64,
    pub lateral_offset: f64,
    pub wrong_way_count: u32,
}

impl CarState {
    pub fn is_finite(&self) -> bool {
        self.position.is_finite()
            && self.heading.is_finite()
            && self.speed.is_finite()
            && self.progress_s.is_finite()
    }
}

/// Place the car on the centerline at arc length `s`, aligned with the tangent.
pub fn place_at(track: &TrackSpec, s: f64) -> CarState {
    let s = track.wrap_s(s);
    let (p, tangent) = track.point_at(s);
    let proj = track.project(p);
    CarState {
        position: p,
        heading: tangent.y.atan2(tangent.x),
        speed: START_SPEED,
        progress_s: proj.progress_s,
        lap_fraction: proj.progress_s / track.length(),
        step_index: 0,
        distance_along: 0.0,
        lateral_offset: proj.lateral_offset,
        wrong_way_count: 0,
    }
}

/// Evaluation start (`None`) or a seeded uniform position along the track.
pub fn reset(track: &TrackSpec, rng_seed: Option<u64>) -> CarState {
    match rng_seed {
        None => place_at(track, 0.0),
        Some(seed) => {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            place_at(track, rng.random_range(0.0..track.length()))
        }
    }
}

/// Reward in `[0, 1]`: forward progress normalized by the top speed, scaled
/// down linearly with distance from the centerline.
pub fn compute_reward(track: &TrackSpec, prev: &CarState, next: &CarState, dt: f64) -> f64 {
    let ds = track.progress_delta(prev.progress_s, next.progress_s);
    let progress = (ds / (V_MAX * dt)).clamp(0.0, 1.0);
    let centering = (1.0 - next.lateral_offset.abs() / track.half_width()).max(0.0);
    progress * centering
}

fn wrap_angle(a: f64) -> f64 {
    let w = (a + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU);
    w - std::f64::consts::PI
}

/// Dynamics, progress, reward and termination for one control step.
pub fn advance(
    track: &TrackSpec,
    state: &CarState,
    action: ActionCmd,
    dt: f64,
) -> Result<(CarState, f64, Termination)> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param(format!("dt must be positive, got {dt}")));
    }
    if !state.is_finite() || !action.is_finite() {
        return Err(Error::numeric("non-finite state or action"));
    }
    let action = ActionCmd::new(action.steer_norm, action.speed_norm);
    let v = state.speed;
    let heading = state.heading + v / WHEELBASE * action.steer_angle().tan() * dt;
    let position = state.position + Vec2::from_angle(state.heading) * (v * dt);
    let target = action.target_speed();
    let speed = (target + (v - target) * (-dt / SPEED_LAG).exp()).clamp(V_MIN, V_MAX);

    let proj = track.project(position);
    let ds = track.progress_delta(state.progress_s, proj.progress_s);
    let tangent_angle = proj.tangent.y.atan2(proj.tangent.x);
    let misalign = wrap_angle(heading - tangent_angle).abs();
    let wrong_way_count = if misalign > std::f64::consts::FRAC_PI_2 {
        state.wrong_way_count + 1
    } else {
        0
    };
    let next = CarState {
        position,
        heading: wrap_angle(heading),
        speed,
        progress_s: proj.progress_s,
        lap_fraction: proj.progress_s / track.length(),
        step_index: state.step_index + 1,
        distance_along: state.distance_along + ds,
        lateral_offset: proj.lateral_offset,
        wrong_way_count,
    };
    let termination = if proj.lateral_offset.abs() > track.half_width() {
        Termination::OffTrack
    } else if next.distance_along >= track.length() {
        Termination::LapComplete
    } else if wrong_way_count >= WRONG_WAY_STEPS {
        Termination::WrongDirection
    } else {
        Termination::Running
    };
    let reward = if termination == Termination::OffTrack {
        0.0
    } else {
        compute_reward(track, state, &next, dt)
    };
    Ok((next, reward, termination))
}
