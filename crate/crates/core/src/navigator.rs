//! Waypoint guidance: turn pose deviations into corrective cues and confirm
//! arrivals, plus trial metrics over a pose trajectory.

use std::io;
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NavError {
    #[error("path needs at least 2 waypoints, got {0}")]
    TooFewWaypoints(usize),
    #[error("waypoints {0} and {1} coincide")]
    DuplicateWaypoint(usize, usize),
    #[error("waypoint {0} is not finite")]
    NonFiniteWaypoint(usize),
    #[error("tolerances must be positive")]
    BadTolerance,
    #[error("empty trajectory")]
    EmptyTrajectory,
    #[error("trajectory not time-sorted at sample {0}")]
    UnsortedTrajectory(usize),
    #[error("unknown bundled path `{0}` (expected path1 or path2)")]
    UnknownPath(String),
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("cannot parse path file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("trajectory CSV: {0}")]
    Csv(#[from] csv::Error),
}

/// Normalize to (-180, 180].
pub fn normalize_deg(a: f64) -> f64 {
    let r = a.rem_euclid(360.0);
    if r > 180.0 { r - 360.0 } else { r }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x_m: f64,
    pub y_m: f64,
    pub heading_deg: f64,
}

impl Pose {
    pub fn new(x_m: f64, y_m: f64, heading_deg: f64) -> Self {
        Self { x_m, y_m, heading_deg: normalize_deg(heading_deg) }
    }

    pub fn dist_to(&self, p: [f64; 2]) -> f64 {
        (p[0] - self.x_m).hypot(p[1] - self.y_m)
    }

    pub fn bearing_to(&self, p: [f64; 2]) -> f64 {
        (p[1] - self.y_m).atan2(p[0] - self.x_m).to_degrees()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub name: String,
    pub waypoints: Vec<[f64; 2]>,
}

const PATH1_JSON: &str = include_str!("../data/paths/path1.json");
const PATH2_JSON: &str = include_str!("../data/paths/path2.json");

impl Path {
    pub fn new(name: impl Into<String>, waypoints: Vec<[f64; 2]>) -> Result<Self, NavError> {
        let p = Self { name: name.into(), waypoints };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), NavError> {
        if self.waypoints.len() < 2 {
            return Err(NavError::TooFewWaypoints(self.waypoints.len()));
        }
        for (i, w) in self.waypoints.iter().enumerate() {
            if !(w[0].is_finite() && w[1].is_finite()) {
                return Err(NavError::NonFiniteWaypoint(i));
            }
        }
        for i in 1..self.waypoints.len() {
            if self.waypoints[i] == self.waypoints[i - 1] {
                return Err(NavError::DuplicateWaypoint(i - 1, i));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, NavError> {
        let p: Path = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &FsPath) -> Result<Self, NavError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| NavError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    /// `path1` (6 waypoints) or `path2` (5 waypoints) in a 6 x 6 m room.
    pub fn bundled(name: &str) -> Result<Self, NavError> {
        match name {
            "path1" => Self::from_json(PATH1_JSON),
            "path2" => Self::from_json(PATH2_JSON),
            other => Err(NavError::UnknownPath(other.to_string())),
        }
    }

    /// Bundled name, or a JSON file path.
    pub fn resolve(spec: &str) -> Result<Self, NavError> {
        match spec {
            "path1" | "path2" => Self::bundled(spec),
            _ => Self::load(FsPath::new(spec)),
        }
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    /// Segment guiding toward target `index` (the first segment before the
    /// first arrival, the last one after finishing).
    pub fn active_segment(&self, index: usize) -> ([f64; 2], [f64; 2]) {
        let end = index.max(1).min(self.waypoints.len() - 1);
        (self.waypoints[end - 1], self.waypoints[end])
    }

    /// Initial pose: on the first waypoint, facing the second.
    pub fn start_pose(&self) -> Pose {
        let [a, b] = [self.waypoints[0], self.waypoints[1]];
        Pose::new(a[0], a[1], (b[1] - a[1]).atan2(b[0] - a[0]).to_degrees())
    }
}

/// Distance to the segment a-b, positive when the point lies to the left of
/// the a->b direction.
pub fn signed_cross_track(x: f64, y: f64, a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let u = (((x - a[0]) * dx + (y - a[1]) * dy) / len2).clamp(0.0, 1.0);
    let (cx, cy) = (a[0] + u * dx, a[1] + u * dy);
    let dist = (x - cx).hypot(y - cy);
    let side = dx * (y - a[1]) - dy * (x - a[0]);
    if side < 0.0 { -dist } else { dist }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceConfig {
    pub pos_tol_m: f64,
    pub heading_tol_deg: f64,
    pub waypoint_radius_m: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self { pos_tol_m: 0.3, heading_tol_deg: 15.0, waypoint_radius_m: 0.3 }
    }
}

impl ToleranceConfig {
    pub fn validate(&self) -> Result<(), NavError> {
        if [self.pos_tol_m, self.heading_tol_deg, self.waypoint_radius_m].iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(NavError::BadTolerance)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GuidanceCue {
    SlideLeft,
    SlideRight,
    SlideFront,
    TapFrontArrived,
    Finished,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GuidanceState {
    /// Index of the waypoint being approached; equals the path length once
    /// the last waypoint has been reached.
    pub index: usize,
}

impl GuidanceState {
    pub fn is_finished(&self, path: &Path) -> bool {
        self.index >= path.len()
    }
}

pub fn guidance_step(pose: &Pose, state: GuidanceState, path: &Path, tol: &ToleranceConfig) -> (GuidanceCue, GuidanceState) {
    if state.is_finished(path) {
        return (GuidanceCue::Finished, state);
    }
    let target = path.waypoints[state.index];
    if pose.dist_to(target) <= tol.waypoint_radius_m {
        return (GuidanceCue::TapFrontArrived, GuidanceState { index: state.index + 1 });
    }
    let err = normalize_deg(pose.bearing_to(target) - pose.heading_deg);
    if err > tol.heading_tol_deg {
        return (GuidanceCue::SlideLeft, state);
    }
    if err < -tol.heading_tol_deg {
        return (GuidanceCue::SlideRight, state);
    }
    let (a, b) = path.active_segment(state.index);
    let xt = signed_cross_track(pose.x_m, pose.y_m, a, b);
    if xt > tol.pos_tol_m {
        return (GuidanceCue::SlideRight, state);
    }
    if xt < -tol.pos_tol_m {
        return (GuidanceCue::SlideLeft, state);
    }
    (GuidanceCue::SlideFront, state)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseSample {
    pub t_s: f64,
    pub pose: Pose,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub completion_time_s: f64,
    pub pct_time_outside_tolerance: f64,
    pub exit_reenter_count: u32,
    pub waypoints_reached: usize,
}

pub fn compute_metrics(trajectory: &[PoseSample], path: &Path, tol: &ToleranceConfig) -> Result<TrialMetrics, NavError> {
    let first = trajectory.first().ok_or(NavError::EmptyTrajectory)?;
    let last = trajectory.last().ok_or(NavError::EmptyTrajectory)?;
    for i in 1..trajectory.len() {
        if trajectory[i].t_s < trajectory[i - 1].t_s {
            return Err(NavError::UnsortedTrajectory(i));
        }
    }
    let mut state = GuidanceState::default();
    let mut outside = 0usize;
    let mut exits = 0u32;
    let mut was_outside = false;
    for (i, s) in trajectory.iter().enumerate() {
        let p = &s.pose;
        if !state.is_finished(path) && p.dist_to(path.waypoints[state.index]) <= tol.waypoint_radius_m {
            state.index += 1;
        }
        let (a, b) = path.active_segment(state.index);
        let out = signed_cross_track(p.x_m, p.y_m, a, b).abs() > tol.pos_tol_m;
        if out {
            outside += 1;
            if i > 0 && !was_outside {
                exits += 1;
            }
        }
        was_outside = out;
    }
    Ok(TrialMetrics {
        completion_time_s: last.t_s - first.t_s,
        pct_time_outside_tolerance: 100.0 * outside as f64 / trajectory.len() as f64,
        exit_reenter_count: exits,
        waypoints_reached: state.index.min(path.len()),
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    t_s: f64,
    x_m: f64,
    y_m: f64,
    heading_deg: f64,
}

pub fn write_trajectory_csv<W: io::Write>(samples: &[PoseSample], out: W) -> Result<(), NavError> {
    let mut w = csv::Writer::from_writer(out);
    for s in samples {
        w.serialize(CsvRow { t_s: s.t_s, x_m: s.pose.x_m, y_m: s.pose.y_m, heading_deg: s.pose.heading_deg })?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_trajectory_csv<R: io::Read>(input: R) -> Result<Vec<PoseSample>, NavError> {
    csv::Reader::from_reader(input)
        .deserialize::<CsvRow>()
        .map(|r| r.map(|r| PoseSample { t_s: r.t_s, pose: Pose::new(r.x_m, r.y_m, r.heading_deg) }).map_err(NavError::from))
        .collect()
}
