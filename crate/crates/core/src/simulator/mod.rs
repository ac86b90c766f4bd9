//! Closed-track racing environment.

mod car;
mod env;
mod image;
mod render;
mod track;

pub use car::{
    advance, compute_reward, place_at, reset, ActionCmd, CarState, Termination, DEFAULT_DT,
    MAX_STEER_DEG, SPEED_LAG, START_SPEED, V_MAX, V_MIN, WHEELBASE, WRONG_WAY_STEPS,
};
pub use env::{Env, EnvParams, EnvStep, Start};
pub use image::Observation;
pub use render::{render_observation, Camera, RenderParams};
pub use track::{make_track, vertex_curvature, Projection, TrackPreset, TrackSpec, Vec2};

use crate::error::Result;

/// Outcome of a single control step including the rendered observation.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub next_state: CarState,
    pub observation: Observation,
    pub reward: f64,
    pub terminated: Termination,
}

pub fn step(
    track: &TrackSpec,
    state: &CarState,
    action: ActionCmd,
    dt: f64,
    render: &RenderParams,
) -> Result<StepOutcome> {
    let (next_state, reward, terminated) = advance(track, state, action, dt)?;
    let observation = render_observation(track, &next_state, render);
    Ok(StepOutcome {
        next_state,
        observation,
        reward,
        terminated,
    })
}

/// `(segment_index, lateral_offset, progress_s)` of the nearest centerline point.
pub fn project_to_centerline(track: &TrackSpec, position: Vec2) -> (usize, f64, f64) {
    let p = track.project(position);
    (p.segment, p.lateral_offset, p.progress_s)
}
