//! Rectangular room with static and looping obstacles.

use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("room dimensions must be positive")]
    BadRoom,
    #[error("obstacle `{0}`: radius must be positive")]
    BadRadius(String),
    #[error("obstacle `{label}` at ({x}, {y}) lies outside the room")]
    OutsideRoom { label: String, x: f64, y: f64 },
    #[error("dynamic obstacle `{0}`: loop needs at least one point and a non-negative speed")]
    BadLoop(String),
    #[error("unknown bundled environment `{0}` (expected empty or obstacles)")]
    Unknown(String),
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse environment: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub width_m: f64,
    pub depth_m: f64,
}

impl Default for Room {
    fn default() -> Self {
        Self { width_m: 6.0, depth_m: 6.0 }
    }
}

impl Room {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        (0.0..=self.width_m).contains(&x) && (0.0..=self.depth_m).contains(&y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticObstacle {
    pub x: f64,
    pub y: f64,
    pub radius_m: f64,
    pub label: String,
    /// Physical height; the camera falls back to the class prior.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicObstacle {
    pub label: String,
    pub radius_m: f64,
    /// Closed loop of waypoints traversed at constant speed.
    #[serde(rename = "loop")]
    pub waypoints: Vec<[f64; 2]>,
    pub speed_mps: f64,
    /// Arc length along the loop at t = 0.
    #[serde(default)]
    pub phase_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height_m: Option<f64>,
}

impl DynamicObstacle {
    pub fn position_at(&self, t_s: f64) -> [f64; 2] {
        let pts = &self.waypoints;
        if pts.len() < 2 {
            return pts.first().copied().unwrap_or([0.0, 0.0]);
        }
        let seg_len = |i: usize| {
            let (a, b) = (pts[i], pts[(i + 1) % pts.len()]);
            (b[0] - a[0]).hypot(b[1] - a[1])
        };
        let perimeter: f64 = (0..pts.len()).map(seg_len).sum();
        if perimeter <= 0.0 {
            return pts[0];
        }
        let mut s = (self.phase_m + self.speed_mps * t_s).rem_euclid(perimeter);
        for i in 0..pts.len() {
            let l = seg_len(i);
            if s <= l && l > 0.0 {
                let (a, b) = (pts[i], pts[(i + 1) % pts.len()]);
                let u = s / l;
                return [a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1])];
            }
            s -= l;
        }
        pts[0]
    }
}

/// An obstacle at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleState {
    pub label: String,
    pub x: f64,
    pub y: f64,
    pub radius_m: f64,
    pub height_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Environment {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub room: Room,
    #[serde(default)]
    pub static_obstacles: Vec<StaticObstacle>,
    #[serde(default)]
    pub dynamic_obstacles: Vec<DynamicObstacle>,
}

const EMPTY_JSON: &str = include_str!("../../data/envs/empty.json");
const OBSTACLES_JSON: &str = include_str!("../../data/envs/obstacles.json");

impl Environment {
    pub fn empty() -> Self {
        Self { name: "empty".into(), ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if !(self.room.width_m > 0.0 && self.room.depth_m > 0.0) {
            return Err(EnvError::BadRoom);
        }
        let inside = |label: &str, x: f64, y: f64| {
            if self.room.contains(x, y) {
                Ok(())
            } else {
                Err(EnvError::OutsideRoom { label: label.to_string(), x, y })
            }
        };
        for o in &self.static_obstacles {
            if !(o.radius_m > 0.0) {
                return Err(EnvError::BadRadius(o.label.clone()));
            }
            inside(&o.label, o.x, o.y)?;
        }
        for o in &self.dynamic_obstacles {
            if !(o.radius_m > 0.0) {
                return Err(EnvError::BadRadius(o.label.clone()));
            }
            if o.waypoints.is_empty() || !(o.speed_mps >= 0.0) {
                return Err(EnvError::BadLoop(o.label.clone()));
            }
            for w in &o.waypoints {
                inside(&o.label, w[0], w[1])?;
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, EnvError> {
        let e: Environment = serde_json::from_str(text)?;
        e.validate()?;
        Ok(e)
    }

    pub fn load(path: &FsPath) -> Result<Self, EnvError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| EnvError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn bundled(name: &str) -> Result<Self, EnvError> {
        match name {
            "empty" => Self::from_json(EMPTY_JSON),
            "obstacles" => Self::from_json(OBSTACLES_JSON),
            other => Err(EnvError::Unknown(other.to_string())),
        }
    }

    /// Bundled name, or a JSON file path.
    pub fn resolve(spec: &str) -> Result<Self, EnvError> {
        match spec {
            "empty" | "obstacles" => Self::bundled(spec),
            _ => Self::load(FsPath::new(spec)),
        }
    }

    pub fn obstacles_at(&self, t_s: f64) -> Vec<ObstacleState> {
        let fixed = self.static_obstacles.iter().map(|o| ObstacleState {
            label: o.label.clone(),
            x: o.x,
            y: o.y,
            radius_m: o.radius_m,
            height_m: o.height_m,
        });
        let moving = self.dynamic_obstacles.iter().map(|o| {
            let [x, y] = o.position_at(t_s);
            ObstacleState { label: o.label.clone(), x, y, radius_m: o.radius_m, height_m: o.height_m }
        });
        fixed.chain(moving).collect()
    }

    /// Whether a body of `body_radius_m` centered at (x, y) overlaps an
    /// obstacle or leaves the room.
    pub fn blocked(&self, obstacles: &[ObstacleState], x: f64, y: f64, body_radius_m: f64) -> bool {
        !self.room.contains(x, y) || obstacles.iter().any(|o| (o.x - x).hypot(o.y - y) < o.radius_m + body_radius_m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_envs_parse() {
        assert!(Environment::bundled("empty").unwrap().obstacles_at(0.0).is_empty());
        let o = Environment::bundled("obstacles").unwrap();
        assert_eq!(o.obstacles_at(0.0).len(), 2);
        assert!(Environment::bundled("nope").is_err());
    }

    #[test]
    fn loop_motion() {
        let d = DynamicObstacle {
            label: "chair".into(),
            radius_m: 0.2,
            waypoints: vec![[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]],
            speed_mps: 1.0,
            phase_m: 0.0,
            height_m: None,
        };
        assert_eq!(d.position_at(0.0), [0.0, 0.0]);
        assert_eq!(d.position_at(1.0), [1.0, 0.0]);
        assert_eq!(d.position_at(3.0), [2.0, 1.0]);
        assert_eq!(d.position_at(8.5), [0.5, 0.0]);
    }

    #[test]
    fn validation() {
        let mut e = Environment::empty();
        e.static_obstacles.push(StaticObstacle { x: 7.0, y: 1.0, radius_m: 0.2, label: "box".into(), height_m: None });
        assert!(matches!(e.validate(), Err(EnvError::OutsideRoom { .. })));
        e.static_obstacles[0].x = 1.0;
        e.static_obstacles[0].radius_m = 0.0;
        assert!(matches!(e.validate(), Err(EnvError::BadRadius(_))));
    }

    #[test]
    fn blocking() {
        let e = Environment::bundled("obstacles").unwrap();
        let obs = e.obstacles_at(0.0);
        assert!(e.blocked(&obs, 3.0, 2.5, 0.2));
        assert!(!e.blocked(&obs, 1.0, 1.0, 0.2));
        assert!(e.blocked(&obs, -0.1, 1.0, 0.2));
    }
}
