//! Kinematic stand-in for a walking wearer who acts on perceived cues.

use serde::{Deserialize, Serialize};

use super::profile::PerceptionProfile;
use crate::haptics::patterns::{Direction, PatternKind, TapSite};
use crate::haptics::HapticPatternId;
use crate::navigator::Pose;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentModel {
    pub walk_speed_mps: f64,
    pub turn_rate_dps: f64,
    /// How long one rotation cue keeps the agent turning.
    pub turn_response_s: f64,
    /// Clearance kept from obstacles and walls.
    pub body_radius_m: f64,
    pub perception: PerceptionProfile,
}

impl Default for AgentModel {
    fn default() -> Self {
        Self {
            walk_speed_mps: 0.8,
            turn_rate_dps: 45.0,
            turn_response_s: 0.5,
            body_radius_m: 0.2,
            perception: PerceptionProfile::perfect(),
        }
    }
}

impl AgentModel {
    pub fn with_perception(perception: PerceptionProfile) -> Self {
        Self { perception, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.walk_speed_mps >= 0.0 && self.turn_rate_dps > 0.0 && self.turn_response_s > 0.0 && self.body_radius_m >= 0.0) {
            return Err("agent speeds and radii must be positive".into());
        }
        self.perception.validate().map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub pose: Pose,
    pub walking: bool,
    /// Signed turn direction (+1 counter-clockwise) and time left.
    pub turn: Option<(f64, f64)>,
    pub pause_s: f64,
}

impl AgentState {
    pub fn at(pose: Pose) -> Self {
        Self { pose, walking: false, turn: None, pause_s: 0.0 }
    }
}

/// Advance one step. A newly perceived cue replaces the current action:
/// forward slides start walking, lateral slides rotate (walking resumes
/// afterwards), a front tap stops and pauses for the reaction latency, and
/// anything else stops the agent.
pub fn step_agent(model: &AgentModel, state: &AgentState, perceived: Option<HapticPatternId>, dt_s: f64) -> AgentState {
    let mut s = *state;
    if let Some(p) = perceived {
        match p.kind() {
            PatternKind::Slide(Direction::Front, _) => {
                s.walking = true;
                s.turn = None;
                s.pause_s = 0.0;
            }
            PatternKind::Slide(Direction::Left, _) => s.turn = Some((1.0, model.turn_response_s.max(dt_s))),
            PatternKind::Slide(Direction::Right, _) => s.turn = Some((-1.0, model.turn_response_s.max(dt_s))),
            PatternKind::Tap(TapSite::Front) => {
                s.walking = false;
                s.turn = None;
                s.pause_s = model.perception.reaction_latency_ms as f64 / 1000.0;
            }
            _ => {
                s.walking = false;
                s.turn = None;
            }
        }
    }

    if s.pause_s > 0.0 {
        s.pause_s = (s.pause_s - dt_s).max(0.0);
        return s;
    }
    if let Some((sign, left)) = s.turn {
        let step = dt_s.min(left);
        s.pose = Pose::new(s.pose.x_m, s.pose.y_m, s.pose.heading_deg + sign * model.turn_rate_dps * step);
        let rest = left - dt_s;
        s.turn = if rest > 1e-9 { Some((sign, rest)) } else { None };
        return s;
    }
    if s.walking {
        let h = s.pose.heading_deg.to_radians();
        let d = model.walk_speed_mps * dt_s;
        s.pose = Pose::new(s.pose.x_m + d * h.cos(), s.pose.y_m + d * h.sin(), s.pose.heading_deg);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use HapticPatternId::*;

    fn start() -> AgentState {
        AgentState::at(Pose::new(1.0, 1.0, 0.0))
    }

    #[test]
    fn slide_front_walks() {
        let s = step_agent(&AgentModel::default(), &start(), Some(SlideFrontFast), 0.1);
        assert!((s.pose.x_m - 1.08).abs() < 1e-12);
        assert_eq!(s.pose.y_m, 1.0);
        assert!(s.walking);
        // keeps walking without further cues
        let s = step_agent(&AgentModel::default(), &s, None, 0.1);
        assert!((s.pose.x_m - 1.16).abs() < 1e-12);
    }

    #[test]
    fn slide_left_rotates_ccw() {
        let s = step_agent(&AgentModel::default(), &start(), Some(SlideLeftSlow), 1.0);
        assert!((s.pose.heading_deg - 45.0).abs() < 1e-12);
        assert_eq!((s.pose.x_m, s.pose.y_m), (1.0, 1.0));
        let s = step_agent(&AgentModel::default(), &start(), Some(SlideRightFast), 1.0);
        assert!((s.pose.heading_deg + 45.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_lasts_turn_response() {
        let m = AgentModel::default();
        let mut s = start();
        s.walking = true;
        s = step_agent(&m, &s, Some(SlideLeftFast), 0.1);
        for _ in 0..9 {
            s = step_agent(&m, &s, None, 0.1);
        }
        // 0.5 s of turning then 0.5 s of walking
        assert!((s.pose.heading_deg - 22.5).abs() < 1e-9);
        let walked = (s.pose.x_m - 1.0).hypot(s.pose.y_m - 1.0);
        assert!((walked - 0.4).abs() < 1e-9);
    }

    #[test]
    fn unmapped_cue_stops() {
        let mut s = start();
        s.walking = true;
        let s = step_agent(&AgentModel::default(), &s, Some(TapCenter), 0.1);
        assert_eq!(s.pose, start().pose);
        assert!(!s.walking);
    }

    #[test]
    fn tap_front_pauses() {
        let m = AgentModel::default();
        let mut s = start();
        s.walking = true;
        s = step_agent(&m, &s, Some(TapFront), 0.1);
        assert!((s.pause_s - 0.4).abs() < 1e-12);
        assert_eq!(s.pose, start().pose);
    }
}
