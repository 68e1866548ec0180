//! Decides which guidance cues reach the haptic scheduler.

use serde::{Deserialize, Serialize};

use crate::haptics::{HapticPatternId, Scheduler, SubmitOutcome};
use crate::navigator::{GuidanceCue, Pose};

/// Movement below which a walking cue is considered not to have taken.
pub const STALL_DISTANCE_M: f64 = 0.05;
pub const STALL_TIME_MS: u64 = 1000;

/// Pattern rendered for a guidance cue; navigation uses the fast slides.
pub fn nav_pattern(cue: GuidanceCue) -> Option<HapticPatternId> {
    match cue {
        GuidanceCue::SlideLeft => Some(HapticPatternId::SlideLeftFast),
        GuidanceCue::SlideRight => Some(HapticPatternId::SlideRightFast),
        GuidanceCue::SlideFront => Some(HapticPatternId::SlideFrontFast),
        GuidanceCue::TapFrontArrived => Some(HapticPatternId::TapFront),
        GuidanceCue::Finished => None,
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CueDispatcher {
    last: Option<HapticPatternId>,
    anchor: Option<(f64, f64, u64)>,
    /// Rotations are being replaced by the forward cue until the wearer moves.
    nudging: bool,
}

impl CueDispatcher {
    pub fn new() -> Self {
        Self::default()
    }

    /// Submit the cue's pattern when it is worth rendering: arrivals always;
    /// rotations when they change or the actuator is idle; the forward cue
    /// only when the wearer is standing still (a walking wearer needs no
    /// reminder, and a redundant cue would delay the next arrival tap).
    /// A pending arrival tap is never overwritten.
    ///
    /// A standing wearer who is told to turn back the way the previous
    /// rotation went (heading and cross-track corrections fighting each
    /// other) gets the forward cue instead: the rotations cancel and only
    /// walking reduces the remaining deviation.
    pub fn offer(
        &mut self,
        cue: GuidanceCue,
        pose: &Pose,
        t_ms: u64,
        sched: &mut Scheduler,
    ) -> Option<(HapticPatternId, SubmitOutcome)> {
        let moved = match self.anchor {
            Some((x, y, _)) => (pose.x_m - x).hypot(pose.y_m - y) > STALL_DISTANCE_M,
            None => true,
        };
        if moved {
            self.anchor = Some((pose.x_m, pose.y_m, t_ms));
            self.nudging = false;
        }
        let stalled = self.anchor.is_some_and(|(_, _, t0)| t_ms.saturating_sub(t0) >= STALL_TIME_MS);

        let mut pattern = nav_pattern(cue)?;
        let mut cue = cue;
        let reverses = matches!(
            (self.last, pattern),
            (Some(HapticPatternId::SlideLeftFast), HapticPatternId::SlideRightFast)
                | (Some(HapticPatternId::SlideRightFast), HapticPatternId::SlideLeftFast)
        );
        let rotation = matches!(cue, GuidanceCue::SlideLeft | GuidanceCue::SlideRight);
        if rotation && (self.nudging || (reverses && stalled)) {
            pattern = HapticPatternId::SlideFrontFast;
            cue = GuidanceCue::SlideFront;
            self.nudging = true;
        }
        if sched.pending() == Some(HapticPatternId::TapFront) && pattern != HapticPatternId::TapFront {
            return None;
        }
        let idle = sched.is_idle(t_ms);
        let changed = self.last != Some(pattern);
        let send = match cue {
            GuidanceCue::TapFrontArrived => true,
            GuidanceCue::SlideLeft | GuidanceCue::SlideRight => changed || idle,
            GuidanceCue::SlideFront => stalled && (changed || idle),
            GuidanceCue::Finished => false,
        };
        if !send {
            return None;
        }
        self.last = Some(pattern);
        if stalled {
            self.anchor = Some((pose.x_m, pose.y_m, t_ms));
        }
        Some((pattern, sched.submit(pattern, t_ms)))
    }
}
