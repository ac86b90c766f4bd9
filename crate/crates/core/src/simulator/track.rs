use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 2D cross product.
    pub fn cross(self, o: Self) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn from_angle(theta: f64) -> Self {
        Self::new(theta.cos(), theta.sin())
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl std::ops::Add for Vec2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Mul<f64> for Vec2 {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        Self::new(self.x * k, self.y * k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackPreset {
    Oval,
    SCurve,
    PaperLikeLoop,
}

impl TrackPreset {
    pub fn name(self) -> &'static str {
        match self {
            TrackPreset::Oval => "oval",
            TrackPreset::SCurve => "s_curve",
            TrackPreset::PaperLikeLoop => "paper_like_loop",
        }
    }
}

impl std::str::FromStr for TrackPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oval" => Ok(TrackPreset::Oval),
            "s_curve" => Ok(TrackPreset::SCurve),
            "paper_like_loop" => Ok(TrackPreset::PaperLikeLoop),
            other => Err(Error::param(format!("unknown track preset `{other}`"))),
        }
    }
}

/// Closed-loop centerline polyline with a constant half width.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackSpec {
    name: String,
    centerline: Vec<Vec2>,
    half_width: f64,
    /// Arc length at the start of each segment.
    cumulative: Vec<f64>,
    length: f64,
}

/// Nearest-point projection onto the centerline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub segment: usize,
    /// Positive to the left of the direction of travel.
    pub lateral_offset: f64,
    pub progress_s: f64,
    /// Unit tangent of the segment.
    pub tangent: Vec2,
}

pub const MIN_POINTS: usize = 8;
const MIN_SEGMENT: f64 = 1e-6;

impl TrackSpec {
    pub fn new(name: impl Into<String>, centerline: Vec<Vec2>, half_width: f64) -> Result<Self> {
        if centerline.len() < MIN_POINTS {
            return Err(Error::param(format!(
                "track needs at least {MIN_POINTS} centerline points, got {}",
                centerline.len()
            )));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::param(format!("half_width must be positive, got {half_width}")));
        }
        if centerline.iter().any(|p| !p.is_finite()) {
            return Err(Error::param("centerline contains non-finite points"));
        }
        let n = centerline.len();
        let mut cumulative = Vec::with_capacity(n);
        let mut length = 0.0;
        for i in 0..n {
            let seg = (centerline[(i + 1) % n] - centerline[i]).norm();
            if seg <= MIN_SEGMENT {
                return Err(Error::param(format!("segment {i} is degenerate ({seg} m)")));
            }
            cumulative.push(length);
            length += seg;
        }
        Ok(Self {
            name: name.into(),
            centerline,
            half_width,
            cumulative,
            length,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn centerline(&self) -> &[Vec2] {
        &self.centerline
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn segments(&self) -> usize {
        self.centerline.len()
    }

    pub fn segment(&self, i: usize) -> (Vec2, Vec2) {
        let n = self.centerline.len();
        (self.centerline[i % n], self.centerline[(i + 1) % n])
    }

    /// Indices of segments passing within `radius` of `center`.
    pub fn segments_near(&self, center: Vec2, radius: f64) -> Vec<usize> {
        (0..self.centerline.len())
            .filter(|&i| segment_dist2(self.segment(i), center) <= radius * radius)
            .collect()
    }

    /// Distance to the closest of the given segments, or infinity.
    pub fn distance_to_segments(&self, p: Vec2, segments: &[usize]) -> f64 {
        segments
            .iter()
            .map(|&i| segment_dist2(self.segment(i), p))
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }

    pub fn segment_length(&self, i: usize) -> f64 {
        let (a, b) = self.segment(i);
        (b - a).norm()
    }

    /// Wrap an arc length into `[0, length)`.
    pub fn wrap_s(&self, s: f64) -> f64 {
        let w = s.rem_euclid(self.length);
        if w >= self.length {
            0.0
        } else {
            w
        }
    }

    /// Signed arc-length difference `to - from`, folded into `(-L/2, L/2]`.
    pub fn progress_delta(&self, from: f64, to: f64) -> f64 {
        let mut d = to - from;
        let half = 0.5 * self.length;
        if d > half {
            d -= self.length;
        } else if d <= -half {
            d += self.length;
        }
        d
    }

    /// Point and unit tangent at arc length `s`.
    pub fn point_at(&self, s: f64) -> (Vec2, Vec2) {
        let s = self.wrap_s(s);
        let i = match self.cumulative.binary_search_by(|c| c.total_cmp(&s)) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        let (a, b) = self.segment(i);
        let seg = b - a;
        let len = seg.norm();
        let t = (s - self.cumulative[i]) / len;
        (a + seg * t, seg * (1.0 / len))
    }

    /// Nearest point on the closed polyline.
    pub fn project(&self, p: Vec2) -> Projection {
        let mut best = (f64::INFINITY, 0usize, 0.0f64);
        for i in 0..self.centerline.len() {
            let (a, b) = self.segment(i);
            let ab = b - a;
            let t = ((p - a).dot(ab) / ab.dot(ab)).clamp(0.0, 1.0);
            let d2 = {
                let q = a + ab * t - p;
                q.dot(q)
            };
            if d2 < best.0 {
                best = (d2, i, t);
            }
        }
        let (_, i, t) = best;
        let (a, b) = self.segment(i);
        let ab = b - a;
        let len = ab.norm();
        let tangent = ab * (1.0 / len);
        let foot = a + ab * t;
        let dist = (p - foot).norm();
        let side = tangent.cross(p - a);
        let lateral_offset = if side < 0.0 { -dist } else { dist };
        Projection {
            segment: i,
            lateral_offset,
            progress_s: self.wrap_s(self.cumulative[i] + t * len),
            tangent,
        }
    }

    /// Plain-text export: `# halfwidth=<m>` then one `x,y` pair per line.
    pub fn to_table(&self) -> String {
        let mut out = format!("# halfwidth={}\n", self.half_width);
        for p in &self.centerline {
            let _ = writeln!(out, "{},{}", p.x, p.y);
        }
        out
    }

    pub fn from_table(name: impl Into<String>, text: &str) -> Result<Self> {
        let mut half_width = None;
        let mut points = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(v) = rest.trim().strip_prefix("halfwidth=") {
                    half_width = Some(v.trim().parse::<f64>().map_err(|e| {
                        Error::param(format!("line {}: bad halfwidth: {e}", lineno + 1))
                    })?);
                }
                continue;
            }
            let mut parts = line.split(',');
            let (Some(x), Some(y), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::param(format!("line {}: expected `x,y`", lineno + 1)));
            };
            let parse = |v: &str| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::param(format!("line {}: {e}", lineno + 1)))
            };
            points.push(Vec2::new(parse(x)?, parse(y)?));
        }
        let half_width =
            half_width.ok_or_else(|| Error::param("missing `# halfwidth=<m>` header"))?;
        Self::new(name, points, half_width)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "track".into());
        Self::from_table(name, &text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_table()).map_err(|e| Error::file(path, e))
    }
}

/// Build one of the deterministic preset tracks. All presets run
/// counter-clockwise.
pub fn make_track(preset: TrackPreset, half_width: f64) -> Result<TrackSpec> {
    if !(0.2..=2.0).contains(&half_width) {
        return Err(Error::param(format!(
            "half_width must lie in [0.2, 2.0] m, got {half_width}"
        )));
    }
    let polar = |n: usize, sx: f64, r: &dyn Fn(f64) -> f64| -> Vec<Vec2> {
        (0..n)
            .map(|i| {
                let t = TAU * i as f64 / n as f64;
                let rr = r(t);
                Vec2::new(sx * rr * t.cos(), rr * t.sin())
            })
            .collect()
    };
    let points = match preset {
        TrackPreset::Oval => polar(64, 1.5, &|_| 2.0),
        // Peanut outline: two concave waists give four curvature sign changes.
        TrackPreset::SCurve => polar(96, 1.2, &|t| 2.4 * (1.0 + 0.3 * (2.0 * t).cos())),
        TrackPreset::PaperLikeLoop => polar(128, 1.0, &|t| {
            3.0 * (1.0 + 0.18 * (3.0 * t).cos() + 0.07 * (5.0 * t).sin())
        }),
    };
    TrackSpec::new(preset.name(), points, half_width)
}

/// Discrete signed curvature at each vertex (turning angle over mean
/// adjacent segment length).
pub fn vertex_curvature(track: &TrackSpec) -> Vec<f64> {
    let n = track.segments();
    (0..n)
        .map(|i| {
            let (a0, b0) = track.segment((i + n - 1) % n);
            let (a1, b1) = track.segment(i);
            let d0 = b0 - a0;
            let d1 = b1 - a1;
            let turn = d0.cross(d1).atan2(d0.dot(d1));
            turn / (0.5 * (d0.norm() + d1.norm()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oval_has_64_points_and_consistent_length() {
        let t = make_track(TrackPreset::Oval, 0.6).unwrap();
        assert_eq!(t.segments(), 64);
        let sum: f64 = (0..64).map(|i| t.segment_length(i)).sum();
        assert!(((t.length() - sum) / sum).abs() < 1e-9);
        assert!(t.length() > 0.0);
    }

    #[test]
    fn s_curve_changes_curvature_sign_at_least_twice() {
        let t = make_track(TrackPreset::SCurve, 0.6).unwrap();
        let k = vertex_curvature(&t);
        let n = k.len();
        let changes = (0..n).filter(|&i| k[i].signum() != k[(i + 1) % n].signum()).count();
        assert!(changes >= 2, "{changes} sign changes");
    }

    #[test]
    fn presets_are_deterministic() {
        for p in [TrackPreset::Oval, TrackPreset::SCurve, TrackPreset::PaperLikeLoop] {
            assert_eq!(make_track(p, 0.6).unwrap(), make_track(p, 0.6).unwrap());
        }
    }

    #[test]
    fn half_width_out_of_range_is_rejected() {
        assert!(matches!(make_track(TrackPreset::Oval, 0.0), Err(Error::Parameter(_))));
        assert!(make_track(TrackPreset::Oval, 2.5).is_err());
    }

    #[test]
    fn invalid_tracks_are_rejected() {
        let square: Vec<Vec2> = (0..8).map(|i| Vec2::new(i as f64, 0.0)).collect();
        assert!(TrackSpec::new("x", square[..7].to_vec(), 0.5).is_err());
        let mut dup = square.clone();
        dup[3] = dup[2];
        assert!(TrackSpec::new("x", dup, 0.5).is_err());
        assert!(TrackSpec::new("x", square, -1.0).is_err());
    }

    #[test]
    fn projection_of_vertex_and_perpendicular_point() {
        let t = make_track(TrackPreset::Oval, 0.6).unwrap();
        let v = t.centerline()[5];
        let p = t.project(v);
        assert!(p.lateral_offset.abs() < 1e-12);
        // Perpendicular offset from a segment midpoint.
        let (a, b) = t.segment(10);
        let mid = a + (b - a) * 0.5;
        let tan = (b - a) * (1.0 / (b - a).norm());
        let left = Vec2::new(-tan.y, tan.x);
        let p = t.project(mid + left * 0.05);
        assert!((p.lateral_offset - 0.05).abs() < 1e-9);
        let p = t.project(mid + left * -0.05);
        assert!((p.lateral_offset + 0.05).abs() < 1e-9);
    }

    #[test]
    fn point_at_and_project_agree() {
        let t = make_track(TrackPreset::PaperLikeLoop, 0.6).unwrap();
        for k in 0..50 {
            let s = t.length() * k as f64 / 50.0;
            let (p, _) = t.point_at(s);
            let pr = t.project(p);
            assert!(t.progress_delta(s, pr.progress_s).abs() < 1e-9);
        }
    }

    #[test]
    fn table_round_trip() {
        let t = make_track(TrackPreset::SCurve, 0.7).unwrap();
        let back = TrackSpec::from_table("s_curve", &t.to_table()).unwrap();
        assert_eq!(back, t);
        assert!(TrackSpec::from_table("x", "1,2\n").is_err());
    }
}

fn segment_dist2((a, b): (Vec2, Vec2), p: Vec2) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(ab) / ab.dot(ab)).clamp(0.0, 1.0);
    let q = a + ab * t - p;
    q.dot(q)
}
