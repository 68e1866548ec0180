//! Discretize a trajectory into timed servo commands.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::kinematics::{solve_position, Calibration, KinematicsError, LinkageGeometry};
use super::patterns::{PatternTrajectory, Temple, CENTER_MM};

pub const DEFAULT_TICK_HZ: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServoCommand {
    pub t_ms: u64,
    pub temple: Temple,
    pub angle1_deg: f64,
    pub angle2_deg: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenderError {
    #[error("tick rate must be positive, got {0}")]
    BadTickRate(f64),
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("tick {tick} ({temple} temple): {source}")]
    Kinematics { tick: usize, temple: Temple, source: KinematicsError },
}

/// One command per tick per active temple, ticks at k / tick_hz for
/// k = 1..=floor(duration * tick_hz). Outside its keyframe span a temple
/// holds the rest pose.
pub fn render(
    traj: &PatternTrajectory,
    geom: &LinkageGeometry,
    cal: &Calibration,
    tick_hz: f64,
) -> Result<Vec<ServoCommand>, RenderError> {
    if !(tick_hz.is_finite() && tick_hz > 0.0) {
        return Err(RenderError::BadTickRate(tick_hz));
    }
    traj.validate().map_err(RenderError::InvalidTrajectory)?;
    let temples = traj.temples();
    let n = (traj.duration_ms as f64 * tick_hz / 1000.0 + 1e-9).floor() as usize;
    let mut out = Vec::with_capacity(n * temples.len());
    for k in 1..=n {
        let t = k as f64 * 1000.0 / tick_hz;
        for &temple in &temples {
            let (pos, pressure) = traj.sample(temple, t).unwrap_or((CENTER_MM, 0.0));
            let (angle1_deg, angle2_deg) = solve_position(pos, pressure, geom, cal.temple(temple))
                .map_err(|source| RenderError::Kinematics { tick: k, temple, source })?;
            out.push(ServoCommand { t_ms: t.round() as u64, temple, angle1_deg, angle2_deg });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::haptics::kinematics::{forward_kinematics, TempleCalibration};
    use crate::haptics::patterns::{compile_pattern, HapticPatternId};

    fn per_temple(cmds: &[ServoCommand], t: Temple) -> usize {
        cmds.iter().filter(|c| c.temple == t).count()
    }

    #[test]
    fn command_counts() {
        let g = LinkageGeometry::default();
        let c = Calibration::default();
        let slow = render(&compile_pattern(HapticPatternId::SlideBackSlow), &g, &c, 50.0).unwrap();
        assert_eq!(per_temple(&slow, Temple::Left), 75);
        assert_eq!(per_temple(&slow, Temple::Right), 75);
        let fast = render(&compile_pattern(HapticPatternId::SlideFrontFast), &g, &c, 50.0).unwrap();
        assert_eq!(per_temple(&fast, Temple::Left), 50);
        assert_eq!(fast.last().unwrap().t_ms, 1000);
        let tap = render(&compile_pattern(HapticPatternId::TapRight), &g, &c, 50.0).unwrap();
        assert_eq!(per_temple(&tap, Temple::Left), 0);
        assert_eq!(per_temple(&tap, Temple::Right), 20);
    }

    #[test]
    fn zero_pressure_is_rest_pose() {
        let g = LinkageGeometry::default();
        let c = Calibration::default();
        let cmds = render(&compile_pattern(HapticPatternId::SlideLeftSlow), &g, &c, 50.0).unwrap();
        // right temple is released after 300 ms
        let late = cmds.iter().find(|c| c.temple == Temple::Right && c.t_ms == 1000).unwrap();
        let p = forward_kinematics(late.angle1_deg, late.angle2_deg, &g).unwrap();
        let rest = g.contact_point(35.0, 0.0, &TempleCalibration::default()).unwrap();
        assert!(p.dist(&rest) < 1e-6);
    }

    #[test]
    fn pressure_pushes_toward_skin() {
        let g = LinkageGeometry::default();
        let weak = Calibration::default();
        let strong = Calibration { left: TempleCalibration { pressure_gain: 2.0, position_offset_mm: 0.0 }, ..weak };
        let traj = compile_pattern(HapticPatternId::TapLeft);
        let a = render(&traj, &g, &weak, 50.0).unwrap();
        let b = render(&traj, &g, &strong, 50.0).unwrap();
        let peak = |cmds: &[ServoCommand]| {
            let c = cmds.iter().find(|c| c.t_ms == 200).unwrap();
            forward_kinematics(c.angle1_deg, c.angle2_deg, &g).unwrap().y
        };
        assert!((peak(&a) - 26.0).abs() < 1e-6);
        assert!((peak(&b) - 30.0).abs() < 1e-6);
    }

    #[test]
    fn kinematic_failure_names_the_tick() {
        let g = LinkageGeometry { contact_line: crate::haptics::kinematics::ContactLine { x_at_zero_mm: -35.0, rest_y_mm: 22.0, press_stroke_mm: 40.0 }, ..LinkageGeometry::default() };
        let err = render(&compile_pattern(HapticPatternId::TapCenter), &g, &Calibration::default(), 50.0).unwrap_err();
        match err {
            RenderError::Kinematics { tick, .. } => assert!(tick > 1 && tick < 20),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            render(&compile_pattern(HapticPatternId::TapCenter), &LinkageGeometry::default(), &Calibration::default(), 0.0),
            Err(RenderError::BadTickRate(_))
        ));
    }
}
