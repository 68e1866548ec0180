//! Planar five-bar linkage: two base-mounted servos, two proximal links, two
//! distal links meeting at the contact point.
//!
//! Frame: base midpoint at the origin, motor 1 at (-b/2, 0), motor 2 at
//! (+b/2, 0), angles in degrees counter-clockwise from +x. The temple contact
//! line is parallel to the base; pressing moves the contact point away from
//! the base.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::patterns::{Temple, WORKSPACE_MM};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("distal-link circles do not intersect for angles ({angle1_deg:.2}, {angle2_deg:.2})")]
    NoIntersection { angle1_deg: f64, angle2_deg: f64 },
    #[error("point ({x:.3}, {y:.3}) mm is out of reach of motor {motor}")]
    Unreachable { motor: u8, x: f64, y: f64 },
    #[error("position {0} mm outside the 0-70 mm workspace")]
    OutOfWorkspace(f64),
    #[error("pressure {0} outside [0, 1]")]
    InvalidPressure(f64),
    #[error("motor {motor} angle {angle_deg:.2} deg outside limits [{min:.2}, {max:.2}]")]
    OutOfLimits { motor: u8, angle_deg: f64, min: f64, max: f64 },
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid calibration: {0}")]
    InvalidCalibration(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(&self, o: &Point) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServoLimits {
    pub min_deg: f64,
    pub max_deg: f64,
}

impl ServoLimits {
    pub const fn new(min_deg: f64, max_deg: f64) -> Self {
        Self { min_deg, max_deg }
    }

    pub fn contains(&self, angle_deg: f64) -> bool {
        angle_deg >= self.min_deg && angle_deg <= self.max_deg
    }

    fn check(&self, motor: u8, angle_deg: f64) -> Result<(), KinematicsError> {
        if self.contains(angle_deg) {
            Ok(())
        } else {
            Err(KinematicsError::OutOfLimits { motor, angle_deg, min: self.min_deg, max: self.max_deg })
        }
    }
}

/// Maps a position along the temple to a point in the linkage plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactLine {
    /// x of position 0 mm; position p maps to x = x_at_zero_mm + p.
    pub x_at_zero_mm: f64,
    /// Distance of the retracted (zero pressure) line from the base.
    pub rest_y_mm: f64,
    /// Normal travel at full pressure and unit gain.
    pub press_stroke_mm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkageGeometry {
    pub base_separation_mm: f64,
    pub proximal_link_mm: [f64; 2],
    pub distal_link_mm: [f64; 2],
    pub contact_line: ContactLine,
    pub servo_limits: [ServoLimits; 2],
}

impl Default for LinkageGeometry {
    fn default() -> Self {
        Self {
            base_separation_mm: 30.0,
            proximal_link_mm: [25.0, 25.0],
            distal_link_mm: [35.0, 35.0],
            contact_line: ContactLine { x_at_zero_mm: -35.0, rest_y_mm: 22.0, press_stroke_mm: 4.0 },
            servo_limits: [ServoLimits::new(40.0, 220.0), ServoLimits::new(-40.0, 140.0)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TempleCalibration {
    pub pressure_gain: f64,
    pub position_offset_mm: f64,
}

impl Default for TempleCalibration {
    fn default() -> Self {
        Self { pressure_gain: 1.0, position_offset_mm: 0.0 }
    }
}

pub const MAX_PRESSURE_GAIN: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Calibration {
    #[serde(default)]
    pub left: TempleCalibration,
    #[serde(default)]
    pub right: TempleCalibration,
}

impl Calibration {
    pub fn temple(&self, t: Temple) -> &TempleCalibration {
        match t {
            Temple::Left => &self.left,
            Temple::Right => &self.right,
        }
    }
}

fn norm_deg(a: f64) -> f64 {
    // (-180, 180]
    let r = a.rem_euclid(360.0);
    if r > 180.0 { r - 360.0 } else { r }
}

/// Bring `a` into the window around the servo range so that angles beyond
/// 180 degrees compare correctly.
fn unwrap_into(a: f64, lim: &ServoLimits) -> f64 {
    let mid = 0.5 * (lim.min_deg + lim.max_deg);
    let mut a = a;
    while a - mid > 180.0 {
        a -= 360.0;
    }
    while a - mid <= -180.0 {
        a += 360.0;
    }
    a
}

impl LinkageGeometry {
    pub fn motors(&self) -> [Point; 2] {
        let h = self.base_separation_mm / 2.0;
        [Point::new(-h, 0.0), Point::new(h, 0.0)]
    }

    pub fn elbows(&self, angle1_deg: f64, angle2_deg: f64) -> [Point; 2] {
        let [m1, m2] = self.motors();
        let (a1, a2) = (angle1_deg.to_radians(), angle2_deg.to_radians());
        [
            Point::new(m1.x + self.proximal_link_mm[0] * a1.cos(), m1.y + self.proximal_link_mm[0] * a1.sin()),
            Point::new(m2.x + self.proximal_link_mm[1] * a2.cos(), m2.y + self.proximal_link_mm[1] * a2.sin()),
        ]
    }

    /// Planar target for a temple position and pressure under calibration.
    pub fn contact_point(
        &self,
        position_mm: f64,
        pressure: f64,
        cal: &TempleCalibration,
    ) -> Result<Point, KinematicsError> {
        if !(0.0..=WORKSPACE_MM).contains(&position_mm) || !position_mm.is_finite() {
            return Err(KinematicsError::OutOfWorkspace(position_mm));
        }
        if !(0.0..=1.0).contains(&pressure) {
            return Err(KinematicsError::InvalidPressure(pressure));
        }
        let line = &self.contact_line;
        Ok(Point::new(
            line.x_at_zero_mm + position_mm + cal.position_offset_mm,
            line.rest_y_mm + line.press_stroke_mm * pressure * cal.pressure_gain,
        ))
    }

    fn check_shape(&self) -> Result<(), KinematicsError> {
        let lens = [self.base_separation_mm, self.proximal_link_mm[0], self.proximal_link_mm[1], self.distal_link_mm[0], self.distal_link_mm[1]];
        if lens.iter().any(|l| !l.is_finite() || *l <= 0.0) {
            return Err(KinematicsError::InvalidGeometry("link lengths must be positive".into()));
        }
        let line = &self.contact_line;
        if !(line.rest_y_mm > 0.0 && line.press_stroke_mm >= 0.0) {
            return Err(KinematicsError::InvalidGeometry("contact line must lie in front of the base".into()));
        }
        for l in &self.servo_limits {
            if !(l.min_deg < l.max_deg) || l.max_deg - l.min_deg > 360.0 {
                return Err(KinematicsError::InvalidGeometry(format!("bad servo limits [{}, {}]", l.min_deg, l.max_deg)));
            }
        }
        Ok(())
    }

    /// Check that the full workspace is reachable within servo limits at
    /// every pressure the calibration can request.
    pub fn validate(&self, cal: &Calibration) -> Result<(), KinematicsError> {
        self.check_shape()?;
        for t in Temple::BOTH {
            let c = cal.temple(t);
            if !(c.pressure_gain > 0.0 && c.pressure_gain <= MAX_PRESSURE_GAIN) {
                return Err(KinematicsError::InvalidCalibration(format!("{t} pressure gain {} not in (0, 2]", c.pressure_gain)));
            }
            if !c.position_offset_mm.is_finite() {
                return Err(KinematicsError::InvalidCalibration(format!("{t} position offset is not finite")));
            }
            for i in 0..=140 {
                let p = i as f64 * 0.5;
                for pressure in [0.0, 0.5, 1.0] {
                    solve_position(p, pressure, self, c).map_err(|e| {
                        KinematicsError::InvalidCalibration(format!("{t} temple at {p} mm, pressure {pressure}: {e}"))
                    })?;
                }
            }
        }
        Ok(())
    }
}

/// Contact point for a servo angle pair: the distal-circle intersection to
/// the left of the elbow-to-elbow direction (the side facing the temple).
pub fn forward_kinematics(angle1_deg: f64, angle2_deg: f64, geom: &LinkageGeometry) -> Result<Point, KinematicsError> {
    geom.servo_limits[0].check(1, angle1_deg)?;
    geom.servo_limits[1].check(2, angle2_deg)?;
    fk_unchecked(angle1_deg, angle2_deg, geom)
}

pub(crate) fn fk_unchecked(angle1_deg: f64, angle2_deg: f64, geom: &LinkageGeometry) -> Result<Point, KinematicsError> {
    let [e1, e2] = geom.elbows(angle1_deg, angle2_deg);
    let (r1, r2) = (geom.distal_link_mm[0], geom.distal_link_mm[1]);
    let d = e1.dist(&e2);
    let none = KinematicsError::NoIntersection { angle1_deg, angle2_deg };
    if d == 0.0 || d > r1 + r2 || d < (r1 - r2).abs() {
        return Err(none);
    }
    let a = (r1 * r1 - r2 * r2 + d * d) / (2.0 * d);
    let h2 = r1 * r1 - a * a;
    if h2 < 0.0 {
        return Err(none);
    }
    let h = h2.sqrt();
    let (ux, uy) = ((e2.x - e1.x) / d, (e2.y - e1.y) / d);
    let mx = e1.x + a * ux;
    let my = e1.y + a * uy;
    Ok(Point::new(mx - h * uy, my + h * ux))
}

/// Angle pair placing the contact point at `target`, elbows outward.
pub fn solve_point(target: Point, geom: &LinkageGeometry) -> Result<(f64, f64), KinematicsError> {
    let motors = geom.motors();
    let mut angles = [0.0; 2];
    for i in 0..2 {
        let m = motors[i];
        let (l1, l2) = (geom.proximal_link_mm[i], geom.distal_link_mm[i]);
        let (dx, dy) = (target.x - m.x, target.y - m.y);
        let r = dx.hypot(dy);
        if r > l1 + l2 || r < (l1 - l2).abs() || r == 0.0 {
            return Err(KinematicsError::Unreachable { motor: i as u8 + 1, x: target.x, y: target.y });
        }
        let phi = dy.atan2(dx).to_degrees();
        let alpha = ((l1 * l1 + r * r - l2 * l2) / (2.0 * l1 * r)).clamp(-1.0, 1.0).acos().to_degrees();
        let raw = if i == 0 { phi + alpha } else { phi - alpha };
        angles[i] = unwrap_into(norm_deg(raw), &geom.servo_limits[i]);
    }
    geom.servo_limits[0].check(1, angles[0])?;
    geom.servo_limits[1].check(2, angles[1])?;
    Ok((angles[0], angles[1]))
}

/// Servo angles for a temple position and pressure.
pub fn solve_position(
    position_mm: f64,
    pressure: f64,
    geom: &LinkageGeometry,
    cal: &TempleCalibration,
) -> Result<(f64, f64), KinematicsError> {
    solve_point(geom.contact_point(position_mm, pressure, cal)?, geom)
}

/// Servo angles placing the retracted contact point at `position_mm`.
pub fn inverse_kinematics(
    position_mm: f64,
    geom: &LinkageGeometry,
    cal: &TempleCalibration,
) -> Result<(f64, f64), KinematicsError> {
    solve_position(position_mm, 0.0, geom, cal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn geom() -> LinkageGeometry {
        LinkageGeometry::default()
    }

    #[test]
    fn default_geometry_validates() {
        geom().validate(&Calibration::default()).unwrap();
        let strong = TempleCalibration { pressure_gain: 2.0, position_offset_mm: 0.0 };
        geom().validate(&Calibration { left: strong, right: strong }).unwrap();
    }

    #[test]
    fn center_is_mirror_symmetric() {
        let (a1, a2) = inverse_kinematics(35.0, &geom(), &TempleCalibration::default()).unwrap();
        assert!((a2 - (180.0 - a1)).abs() < 1e-9, "{a1} {a2}");
        let p = forward_kinematics(a1, a2, &geom()).unwrap();
        assert!(p.x.abs() < 1e-9);
    }

    #[test]
    fn mirrored_angles_land_on_bisector() {
        for th in [60.0, 90.0, 110.0, 130.0] {
            let p = forward_kinematics(th, 180.0 - th, &geom()).unwrap();
            assert!(p.x.abs() < 1e-9);
            assert!(p.y > 0.0);
        }
    }

    #[test]
    fn collinear_outstretched_has_no_intersection() {
        // both links pointing straight out: elbows 80 mm apart > 70
        let r = fk_unchecked(180.0, 0.0, &geom());
        assert!(matches!(r, Err(KinematicsError::NoIntersection { .. })));
        let g = LinkageGeometry {
            servo_limits: [ServoLimits::new(-360.0, 0.0), ServoLimits::new(0.0, 360.0)],
            ..geom()
        };
        assert!(matches!(forward_kinematics(-180.0, 0.0, &g), Err(KinematicsError::NoIntersection { .. })));
    }

    #[test]
    fn endpoints_round_trip() {
        let cal = TempleCalibration::default();
        for p in [0.0, 70.0] {
            let (a1, a2) = inverse_kinematics(p, &geom(), &cal).unwrap();
            let q = forward_kinematics(a1, a2, &geom()).unwrap();
            let want = geom().contact_point(p, 0.0, &cal).unwrap();
            assert!(q.dist(&want) < 0.1);
        }
    }

    #[test]
    fn outside_workspace_rejected() {
        let cal = TempleCalibration::default();
        assert_eq!(inverse_kinematics(80.0, &geom(), &cal), Err(KinematicsError::OutOfWorkspace(80.0)));
        assert!(inverse_kinematics(-0.1, &geom(), &cal).is_err());
    }

    #[test]
    fn far_offsets_fail_validation() {
        let off = TempleCalibration { pressure_gain: 1.0, position_offset_mm: 40.0 };
        assert!(geom().validate(&Calibration { left: off, right: TempleCalibration::default() }).is_err());
        let zero_gain = TempleCalibration { pressure_gain: 0.0, position_offset_mm: 0.0 };
        assert!(geom().validate(&Calibration { left: zero_gain, right: zero_gain }).is_err());
    }

    #[test]
    fn bad_links_rejected() {
        let g = LinkageGeometry { distal_link_mm: [35.0, -1.0], ..geom() };
        assert!(matches!(g.validate(&Calibration::default()), Err(KinematicsError::InvalidGeometry(_))));
    }

    proptest! {
        #[test]
        fn no_branch_flip_along_line(p in 0.0..69.9f64, pressure in 0.0..=1.0f64) {
            // small steps along the line produce small angle changes
            let cal = TempleCalibration::default();
            let (a1, a2) = solve_position(p, pressure, &geom(), &cal).unwrap();
            let (b1, b2) = solve_position(p + 0.1, pressure, &geom(), &cal).unwrap();
            prop_assert!((a1 - b1).abs() < 1.0 && (a2 - b2).abs() < 1.0);
        }
    }
}
