//! Multi-frame consolidation and hazard flagging.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::perception::{priority_order, score_priority, GridCell, MappedFrame};

pub const DEFAULT_WINDOW: usize = 5;
pub const DEFAULT_PERSISTENCE: usize = 3;
pub const DEFAULT_HAZARD_DISTANCE_M: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("frame {got} is not newer than the last frame {last} in the window")]
    OutOfOrder { got: u64, last: u64 },
    #[error("window capacity must be positive")]
    ZeroCapacity,
}

/// Ring of the most recent mapped frames, ordered by frame id.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneWindow {
    capacity: usize,
    frames: VecDeque<MappedFrame>,
}

impl SceneWindow {
    pub fn new(capacity: usize) -> Result<Self, SceneError> {
        if capacity == 0 {
            return Err(SceneError::ZeroCapacity);
        }
        Ok(Self { capacity, frames: VecDeque::with_capacity(capacity) })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> impl Iterator<Item = &MappedFrame> {
        self.frames.iter()
    }

    pub fn clear(&mut self) {
        self.frames.clear();
    }

    pub fn push_frame(&mut self, mapped: MappedFrame) -> Result<(), SceneError> {
        if let Some(last) = self.frames.back() {
            if mapped.frame_id <= last.frame_id {
                return Err(SceneError::OutOfOrder { got: mapped.frame_id, last: last.frame_id });
            }
        }
        if self.frames.len() == self.capacity {
            self.frames.pop_front();
        }
        self.frames.push_back(mapped);
        Ok(())
    }

    /// Objects seen under the same (label, cell) in at least `k` frames of the
    /// window. `k` is clamped into `1..=capacity`.
    pub fn consolidate(&self, k: usize) -> SceneSummary {
        let k = k.clamp(1, self.capacity);
        // per (label, cell): number of frames containing it, and one distance
        // per frame (the nearest, when several share the key)
        let mut seen: BTreeMap<(String, GridCell), (usize, Vec<f64>)> = BTreeMap::new();
        for frame in &self.frames {
            let mut in_frame: BTreeMap<(String, GridCell), Option<f64>> = BTreeMap::new();
            for obj in &frame.objects {
                let slot = in_frame.entry((obj.label.clone(), obj.cell)).or_insert(None);
                if let Some(d) = obj.distance_m {
                    *slot = Some(slot.map_or(d, |cur: f64| cur.min(d)));
                }
            }
            for (key, dist) in in_frame {
                let entry = seen.entry(key).or_default();
                entry.0 += 1;
                entry.1.extend(dist);
            }
        }

        let mut objects: Vec<ConsolidatedObject> = seen
            .into_iter()
            .filter(|(_, (count, _))| *count >= k)
            .map(|((label, cell), (count, mut dists))| {
                let distance_m = median(&mut dists);
                ConsolidatedObject {
                    label,
                    cell,
                    distance_m,
                    persistence_count: count,
                    priority: score_priority(cell, distance_m),
                    immediate_hazard: false,
                }
            })
            .collect();
        objects.sort_by(|a, b| {
            priority_order(a.priority, a.distance_m, &a.label, b.priority, b.distance_m, &b.label)
                .then_with(|| a.cell.cmp(&b.cell))
        });

        let window_span = match (self.frames.front(), self.frames.back()) {
            (Some(a), Some(b)) => Some((a.frame_id, b.frame_id)),
            _ => None,
        };
        SceneSummary { objects, window_span }
    }
}

impl Default for SceneWindow {
    fn default() -> Self {
        Self { capacity: DEFAULT_WINDOW, frames: VecDeque::with_capacity(DEFAULT_WINDOW) }
    }
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 { values[n / 2] } else { (values[n / 2 - 1] + values[n / 2]) / 2.0 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsolidatedObject {
    pub label: String,
    pub cell: GridCell,
    pub distance_m: Option<f64>,
    pub persistence_count: usize,
    pub priority: f64,
    pub immediate_hazard: bool,
}

impl ConsolidatedObject {
    pub fn is_hazard_at(&self, hazard_dist_m: f64) -> bool {
        self.cell == GridCell::BOTTOM_CENTER && self.distance_m.is_some_and(|d| d < hazard_dist_m)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SceneSummary {
    pub objects: Vec<ConsolidatedObject>,
    pub window_span: Option<(u64, u64)>,
}

impl SceneSummary {
    pub fn has_immediate_hazard(&self) -> bool {
        self.objects.iter().any(|o| o.immediate_hazard)
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }
}

/// Mark bottom-center objects nearer than `hazard_dist_m` as immediate
/// hazards and clear the flag on everything else.
pub fn flag_hazards(mut summary: SceneSummary, hazard_dist_m: f64) -> SceneSummary {
    for obj in &mut summary.objects {
        obj.immediate_hazard = obj.is_hazard_at(hazard_dist_m);
    }
    summary
}

/// Window plus thresholds; the per-session owner of scene state.
#[derive(Debug, Clone)]
pub struct SceneBuilder {
    pub window: SceneWindow,
    pub persistence: usize,
    pub hazard_dist_m: f64,
}

impl SceneBuilder {
    pub fn new(window: usize, persistence: usize, hazard_dist_m: f64) -> Result<Self, SceneError> {
        Ok(Self { window: SceneWindow::new(window)?, persistence, hazard_dist_m })
    }

    pub fn push(&mut self, mapped: MappedFrame) -> Result<(), SceneError> {
        self.window.push_frame(mapped)
    }

    pub fn summary(&self) -> SceneSummary {
        flag_hazards(self.window.consolidate(self.persistence), self.hazard_dist_m)
    }

    /// Enough frames for an object to reach the persistence threshold.
    pub fn is_primed(&self) -> bool {
        self.window.len() >= self.persistence.clamp(1, self.window.capacity())
    }
}

impl Default for SceneBuilder {
    fn default() -> Self {
        Self {
            window: SceneWindow::default(),
            persistence: DEFAULT_PERSISTENCE,
            hazard_dist_m: DEFAULT_HAZARD_DISTANCE_M,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::{BBox, Column, Row, SpatialObject};
    use proptest::prelude::*;

    fn obj(label: &str, cell: GridCell, d: Option<f64>) -> SpatialObject {
        SpatialObject {
            label: label.into(),
            cell,
            distance_m: d,
            priority: score_priority(cell, d),
            bbox: BBox::new(0.4, 0.6, 0.6, 0.9).unwrap(),
            confidence: 0.9,
        }
    }

    fn frame(id: u64, objects: Vec<SpatialObject>) -> MappedFrame {
        MappedFrame { frame_id: id, timestamp_ms: id * 100, objects, diagnostics: vec![] }
    }

    fn summary_obj(cell: GridCell, d: Option<f64>) -> ConsolidatedObject {
        ConsolidatedObject {
            label: "chair".into(),
            cell,
            distance_m: d,
            persistence_count: 3,
            priority: score_priority(cell, d),
            immediate_hazard: false,
        }
    }

    #[test]
    fn ring_evicts_oldest() {
        let mut w = SceneWindow::new(5).unwrap();
        for id in 1..=6 {
            w.push_frame(frame(id, vec![])).unwrap();
        }
        let ids: Vec<u64> = w.frames().map(|f| f.frame_id).collect();
        assert_eq!(ids, vec![2, 3, 4, 5, 6]);
    }

    #[test]
    fn first_push_and_out_of_order() {
        let mut w = SceneWindow::new(5).unwrap();
        w.push_frame(frame(7, vec![])).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w.push_frame(frame(7, vec![])), Err(SceneError::OutOfOrder { got: 7, last: 7 }));
        assert!(w.push_frame(frame(3, vec![])).is_err());
        assert_eq!(w.len(), 1);
        assert!(SceneWindow::new(0).is_err());
    }

    #[test]
    fn persistence_threshold() {
        let bc = GridCell::BOTTOM_CENTER;
        let mut w = SceneWindow::new(5).unwrap();
        for id in 1..=5 {
            let mut objs = vec![];
            if id <= 3 {
                objs.push(obj("chair", bc, Some(0.9 + 0.1 * (id as f64 - 1.0))));
            }
            if id == 4 {
                objs.push(obj("ghost", bc, Some(0.5)));
            }
            w.push_frame(frame(id, objs)).unwrap();
        }
        let s = w.consolidate(3);
        assert_eq!(s.objects.len(), 1);
        let chair = &s.objects[0];
        assert_eq!(chair.label, "chair");
        assert_eq!(chair.persistence_count, 3);
        // median of {0.9, 1.0, 1.1}
        assert!((chair.distance_m.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(s.window_span, Some((1, 5)));
    }

    #[test]
    fn median_of_even_count_is_midpoint() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0, 4.0]), Some(2.5));
        assert_eq!(median(&mut []), None);
    }

    #[test]
    fn hazard_examples() {
        let bc = GridCell::BOTTOM_CENTER;
        let tr = GridCell::new(Row::Top, Column::Right);
        let s = SceneSummary {
            objects: vec![summary_obj(bc, Some(0.8)), summary_obj(bc, Some(1.2)), summary_obj(tr, Some(0.5))],
            window_span: Some((1, 5)),
        };
        let flagged = flag_hazards(s, DEFAULT_HAZARD_DISTANCE_M);
        let f: Vec<bool> = flagged.objects.iter().map(|o| o.immediate_hazard).collect();
        assert_eq!(f, vec![true, false, false]);
    }

    #[test]
    fn hazard_threshold_is_strict() {
        let s = SceneSummary { objects: vec![summary_obj(GridCell::BOTTOM_CENTER, Some(1.0))], window_span: None };
        assert!(!flag_hazards(s, 1.0).objects[0].immediate_hazard);
    }

    #[test]
    fn absent_distance_never_hazard() {
        let s = SceneSummary { objects: vec![summary_obj(GridCell::BOTTOM_CENTER, None)], window_span: None };
        assert!(!flag_hazards(s, 1.0).objects[0].immediate_hazard);
    }

    #[test]
    fn summary_json_field_names() {
        let s = flag_hazards(
            SceneSummary { objects: vec![summary_obj(GridCell::BOTTOM_CENTER, Some(0.8))], window_span: Some((4, 8)) },
            1.0,
        );
        let v = serde_json::to_value(&s).unwrap();
        let o = &v["objects"][0];
        assert_eq!(o["cell"], "bottom-center");
        assert_eq!(o["persistence_count"], 3);
        assert_eq!(o["immediate_hazard"], true);
        assert_eq!(v["window_span"], serde_json::json!([4, 8]));
    }

    fn arb_frames_n(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<Vec<(u8, usize, Option<f64>)>>> {
        proptest::collection::vec(
            proptest::collection::vec((0u8..3, 0usize..6, proptest::option::of(0.2..5.0f64)), 0..6),
            n,
        )
    }

    fn arb_frames() -> impl Strategy<Value = Vec<Vec<(u8, usize, Option<f64>)>>> {
        arb_frames_n(1..=5)
    }

    fn build(frames: &[Vec<(u8, usize, Option<f64>)>]) -> SceneWindow {
        let mut w = SceneWindow::new(5).unwrap();
        for (i, objs) in frames.iter().enumerate() {
            let objs = objs
                .iter()
                .map(|(l, c, d)| obj(&format!("thing{l}"), GridCell::ALL[*c], *d))
                .collect();
            w.push_frame(frame(i as u64 + 1, objs)).unwrap();
        }
        w
    }

    proptest! {
        #[test]
        fn order_within_frames_irrelevant(frames in arb_frames(), k in 1usize..=5) {
            let a = build(&frames).consolidate(k);
            let reversed: Vec<_> = frames.iter().map(|f| f.iter().rev().cloned().collect()).collect();
            let b = build(&reversed).consolidate(k);
            prop_assert_eq!(a, b);
        }

        #[test]
        fn always_present_always_emitted(frames in arb_frames_n(5..=5), k in 1usize..=5) {
            let with_anchor: Vec<_> = frames
                .iter()
                .map(|f| { let mut f = f.clone(); f.push((9, 4, Some(2.0))); f })
                .collect();
            let s = build(&with_anchor).consolidate(k);
            prop_assert!(s.objects.iter().any(|o| o.label == "thing9"));
            for o in &s.objects {
                prop_assert!((k..=5).contains(&o.persistence_count));
            }
        }
    }
}
