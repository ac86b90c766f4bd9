use serde::{Deserialize, Serialize};

use super::car::CarState;
use super::image::Observation;
use super::track::{TrackSpec, Vec2};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Camera {
    /// Car-centered, heading-aligned top-down window; forward is up.
    TopdownLocal,
    /// Ground-plane rays cast ahead of the car with inverse-perspective depth.
    PseudoForward,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderParams {
    pub width: usize,
    pub height: usize,
    pub camera: Camera,
    pub surface_intensity: f32,
    pub offtrack_intensity: f32,
    pub line_intensity: f32,
    /// Meters from the car to the top edge of the view.
    pub view_distance: f64,
    /// Width of the painted edge line inside each track border.
    pub line_width: f64,
}

impl Default for RenderParams {
    fn default() -> Self {
        Self {
            width: 32,
            height: 24,
            camera: Camera::TopdownLocal,
            surface_intensity: 0.5,
            offtrack_intensity: 0.15,
            line_intensity: 0.9,
            view_distance: 2.0,
            line_width: 0.1,
        }
    }
}

impl RenderParams {
    pub fn validate(&self) -> Result<()> {
        if self.width < 8 || self.height < 8 {
            return Err(Error::param(format!(
                "render size must be at least 8x8, got {}x{}",
                self.width, self.height
            )));
        }
        let vals = [
            self.surface_intensity,
            self.offtrack_intensity,
            self.line_intensity,
        ];
        if vals.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::param("render intensities must lie in [0, 1]"));
        }
        for i in 0..3 {
            for j in i + 1..3 {
                if (vals[i] - vals[j]).abs() < 0.05 {
                    return Err(Error::param(
                        "surface, off-track and line intensities must differ by at least 0.05",
                    ));
                }
            }
        }
        if !(self.view_distance > 0.0 && self.view_distance.is_finite()) {
            return Err(Error::param("view_distance must be positive"));
        }
        if !(self.line_width >= 0.0 && self.line_width.is_finite()) {
            return Err(Error::param("line_width must be non-negative"));
        }
        Ok(())
    }
}

/// Length of `[lo, hi]` overlapping `[a, b]`.
fn overlap(lo: f64, hi: f64, a: f64, b: f64) -> f64 {
    (hi.min(b) - lo.max(a)).max(0.0)
}

/// Box-filtered intensity of the banded profile (surface, line, off-track)
/// as a function of unsigned distance from the centerline.
fn shade(d: f64, footprint: f64, hw: f64, params: &RenderParams) -> f32 {
    let h = 0.5 * footprint.max(1e-9);
    let (lo, hi) = (d - h, d + h);
    let line_start = (hw - params.line_width).max(0.0);
    let surface = overlap(lo, hi, f64::NEG_INFINITY, line_start);
    let line = overlap(lo, hi, line_start, hw);
    let off = overlap(lo, hi, hw, f64::INFINITY);
    let v = (surface * params.surface_intensity as f64
        + line * params.line_intensity as f64
        + off * params.offtrack_intensity as f64)
        / (hi - lo);
    v.clamp(0.0, 1.0) as f32
}

/// Camera-view image of the track from the car's pose.
pub fn render_observation(
    track: &TrackSpec,
    state: &CarState,
    params: &RenderParams,
) -> Observation {
    let (w, h) = (params.width, params.height);
    let fwd = Vec2::from_angle(state.heading);
    let left = Vec2::new(-fwd.y, fwd.x);
    let hw = track.half_width();
    // (world point, footprint) per pixel, row-major.
    let mut samples = Vec::with_capacity(w * h);
    match params.camera {
        Camera::TopdownLocal => {
            let px = 2.0 * params.view_distance / h as f64;
            for r in 0..h {
                let f = params.view_distance - (r as f64 + 0.5) * px;
                for c in 0..w {
                    let l = (w as f64 / 2.0 - (c as f64 + 0.5)) * px;
                    samples.push((state.position + fwd * f + left * l, px));
                }
            }
        }
        Camera::PseudoForward => {
            let near = 0.15 * params.view_distance;
            let far = params.view_distance;
            let half_fov_tan = 1.0;
            for r in 0..h {
                // Top row looks farthest.
                let t = 1.0 - (r as f64 + 0.5) / h as f64;
                let depth = near / (1.0 - t * (1.0 - near / far));
                let px = 2.0 * depth * half_fov_tan / w as f64;
                for c in 0..w {
                    let u = 1.0 - 2.0 * (c as f64 + 0.5) / w as f64;
                    let p = state.position + fwd * depth + left * (u * depth * half_fov_tan);
                    samples.push((p, px));
                }
            }
        }
    }
    // Beyond hw + footprint/2 every pixel shades as off-track, so only
    // segments that can come that close to some pixel matter.
    let reach = samples
        .iter()
        .map(|&(p, px)| (p - state.position).norm() + 0.5 * px)
        .fold(0.0, f64::max);
    let near = track.segments_near(state.position, reach + hw + 1e-9);
    let pixels = samples
        .iter()
        .map(|&(p, px)| {
            let d = track.distance_to_segments(p, &near).min(hw + px + 1.0);
            shade(d, px, hw, params)
        })
        .collect();
    Observation::new(w, h, pixels).expect("render buffer sized from params")
}
