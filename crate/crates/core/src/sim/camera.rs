//! Synthetic head-mounted camera: projects room obstacles into detections.

use serde::{Deserialize, Serialize};

use super::env::ObstacleState;
use crate::navigator::{normalize_deg, Pose};
use crate::perception::{BBox, CameraModel, Detection, DetectionFrame};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraRig {
    pub image_width_px: u32,
    pub image_height_px: u32,
    pub mount_height_m: f64,
    pub range_m: f64,
    pub confidence: f64,
}

impl Default for CameraRig {
    fn default() -> Self {
        Self { image_width_px: 640, image_height_px: 480, mount_height_m: 1.6, range_m: 5.0, confidence: 0.9 }
    }
}

impl CameraRig {
    pub fn half_fov_deg(&self, cam: &CameraModel) -> f64 {
        (f64::from(self.image_width_px) / 2.0 / cam.focal_length_px).atan().to_degrees()
    }
}

/// Physical height used to size a box: explicit, else class prior, else 1 m.
pub fn object_height(o: &ObstacleState, cam: &CameraModel) -> f64 {
    o.height_m.or_else(|| cam.class_height_priors_m.get(&o.label).copied()).unwrap_or(1.0)
}

struct Visible<'a> {
    obs: &'a ObstacleState,
    dist: f64,
    az_deg: f64,
    half_width_deg: f64,
}

fn covered(intervals: &[(f64, f64)], lo: f64, hi: f64) -> bool {
    let mut sorted: Vec<(f64, f64)> = intervals.iter().copied().filter(|(a, b)| *b >= lo && *a <= hi).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut reach = lo;
    for (a, b) in sorted {
        if a > reach {
            return false;
        }
        reach = reach.max(b);
        if reach >= hi {
            return true;
        }
    }
    reach >= hi
}

/// Project every obstacle inside the field of view and range; obstacles
/// whose angular extent is entirely hidden behind nearer ones are culled.
/// Detections carry the true center distance.
pub fn synth_camera(
    obstacles: &[ObstacleState],
    pose: &Pose,
    cam: &CameraModel,
    rig: &CameraRig,
    frame_id: u64,
    timestamp_ms: u64,
) -> DetectionFrame {
    let half_fov = rig.half_fov_deg(cam);
    let mut visible: Vec<Visible> = obstacles
        .iter()
        .filter_map(|o| {
            let dist = (o.x - pose.x_m).hypot(o.y - pose.y_m);
            if dist > rig.range_m || dist <= o.radius_m {
                return None;
            }
            let bearing = (o.y - pose.y_m).atan2(o.x - pose.x_m).to_degrees();
            let az_deg = normalize_deg(bearing - pose.heading_deg);
            if az_deg.abs() > half_fov {
                return None;
            }
            let half_width_deg = (o.radius_m / dist).asin().to_degrees();
            Some(Visible { obs: o, dist, az_deg, half_width_deg })
        })
        .collect();
    visible.sort_by(|a, b| a.dist.total_cmp(&b.dist).then_with(|| a.obs.label.cmp(&b.obs.label)));

    let (w, h) = (f64::from(rig.image_width_px), f64::from(rig.image_height_px));
    let f = cam.focal_length_px;
    let mut shadows: Vec<(f64, f64)> = Vec::new();
    let mut detections = Vec::new();
    for v in visible {
        let (lo, hi) = (v.az_deg - v.half_width_deg, v.az_deg + v.half_width_deg);
        if covered(&shadows, lo, hi) {
            continue;
        }
        shadows.push((lo, hi));

        let xc = 0.5 - f * v.az_deg.to_radians().tan() / w;
        let half_w = f * v.obs.radius_m / (v.dist * w);
        let x_min = (xc - half_w).clamp(0.0, 1.0);
        let x_max = (xc + half_w).clamp(0.0, 1.0);
        let y_max = (0.5 + f * rig.mount_height_m / (v.dist * h)).min(1.0);
        let y_min = (y_max - f * object_height(v.obs, cam) / (v.dist * h)).max(0.0);
        let Ok(bbox) = BBox::new(x_min, y_min, x_max, y_max) else {
            continue;
        };
        detections.push(Detection {
            label: v.obs.label.clone(),
            bbox,
            confidence: rig.confidence,
            true_distance_m: Some(v.dist),
        });
    }
    DetectionFrame {
        frame_id,
        timestamp_ms,
        image_width_px: rig.image_width_px,
        image_height_px: rig.image_height_px,
        detections,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::{assign_cell, Column, GridCell, Row};
    use proptest::prelude::*;

    fn obstacle(label: &str, x: f64, y: f64, r: f64) -> ObstacleState {
        ObstacleState { label: label.into(), x, y, radius_m: r, height_m: None }
    }

    fn shoot(obs: &[ObstacleState], pose: Pose) -> DetectionFrame {
        synth_camera(obs, &pose, &CameraModel::default(), &CameraRig::default(), 1, 0)
    }

    #[test]
    fn dead_ahead_one_meter() {
        // chair 1 m ahead: centroid x = 0.5; box spans the lower image
        // (bottom clamped to the frame edge, 0.9 m chair is 1.04 frame heights tall)
        let f = shoot(&[obstacle("chair", 1.0, 0.0, 0.25)], Pose::new(0.0, 0.0, 0.0));
        assert_eq!(f.detections.len(), 1);
        let d = &f.detections[0];
        let (cx, _) = d.bbox.centroid();
        assert!((cx - 0.5).abs() < 1e-12);
        assert_eq!(d.bbox.y_max(), 1.0);
        assert_eq!(assign_cell(&d.bbox), GridCell::BOTTOM_CENTER);
        assert_eq!(d.true_distance_m, Some(1.0));
    }

    #[test]
    fn behind_and_empty() {
        assert!(shoot(&[obstacle("chair", -2.0, 0.0, 0.25)], Pose::new(0.0, 0.0, 0.0)).detections.is_empty());
        assert!(shoot(&[], Pose::new(0.0, 0.0, 0.0)).detections.is_empty());
        assert!(shoot(&[obstacle("chair", 6.0, 0.0, 0.25)], Pose::new(0.0, 0.0, 0.0)).detections.is_empty());
    }

    #[test]
    fn left_of_heading_is_left_column() {
        // 20 degrees counter-clockwise of the heading
        let a = 20f64.to_radians();
        let f = shoot(&[obstacle("box", 3.0 * a.cos(), 3.0 * a.sin(), 0.2)], Pose::new(0.0, 0.0, 0.0));
        assert_eq!(assign_cell(&f.detections[0].bbox), GridCell::new(Row::Bottom, Column::Left));
    }

    #[test]
    fn occlusion_culls_hidden() {
        let obs = [obstacle("table", 1.5, 0.0, 0.5), obstacle("box", 3.0, 0.0, 0.2)];
        let f = shoot(&obs, Pose::new(0.0, 0.0, 0.0));
        assert_eq!(f.detections.len(), 1);
        assert_eq!(f.detections[0].label, "table");
        // partially visible survives
        let obs = [obstacle("box", 1.5, 0.0, 0.1), obstacle("table", 3.0, 0.0, 0.5)];
        assert_eq!(shoot(&obs, Pose::new(0.0, 0.0, 0.0)).detections.len(), 2);
    }

    #[test]
    fn unknown_label_uses_one_meter() {
        let f = shoot(&[ObstacleState { label: "crate".into(), x: 4.0, y: 0.0, radius_m: 0.2, height_m: None }], Pose::new(0.0, 0.0, 0.0));
        let h = f.detections[0].bbox.height();
        let want = CameraModel::default().focal_length_px * 1.0 / (4.0 * 480.0);
        assert!((h - want).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn closer_never_shrinks(az in -28.0..28.0f64, d1 in 0.5..5.0f64, frac in 0.1..1.0f64, r in 0.1..0.4f64) {
            let d2 = (d1 * frac).max(r + 0.01);
            let a = az.to_radians();
            let pose = Pose::new(0.0, 0.0, 0.0);
            let far = shoot(&[obstacle("chair", d1 * a.cos(), d1 * a.sin(), r)], pose);
            let near = shoot(&[obstacle("chair", d2 * a.cos(), d2 * a.sin(), r)], pose);
            if let (Some(f), Some(n)) = (far.detections.first(), near.detections.first()) {
                prop_assert!(n.bbox.height() >= f.bbox.height() - 1e-12);
            }
        }
    }
}
