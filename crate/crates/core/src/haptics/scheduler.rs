//! Non-preemptive playback with a single coalescing pending slot.

use std::sync::{Arc, Mutex, MutexGuard};

use serde::{Deserialize, Serialize};

use super::patterns::HapticPatternId;

/// Pause after each pattern before the next may start.
pub const DEFAULT_REST_GAP_MS: u64 = 250;
/// End-to-end playback budget for one navigation cue.
pub const CUE_BUDGET_MS: u64 = 1250;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SubmitOutcome {
    Accepted,
    Coalesced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Playback {
    pub pattern: HapticPatternId,
    pub start_ms: u64,
    pub end_ms: u64,
}

#[derive(Debug, Clone)]
pub struct Scheduler {
    rest_gap_ms: u64,
    current: Option<Playback>,
    pending: Option<HapticPatternId>,
    started: Vec<Playback>,
}

impl Default for Scheduler {
    fn default() -> Self {
        Self::new(DEFAULT_REST_GAP_MS)
    }
}

impl Scheduler {
    pub fn new(rest_gap_ms: u64) -> Self {
        Self { rest_gap_ms, current: None, pending: None, started: Vec::new() }
    }

    pub fn rest_gap_ms(&self) -> u64 {
        self.rest_gap_ms
    }

    /// Time at which the actuator is next free (end of play plus rest gap).
    pub fn busy_until(&self) -> u64 {
        self.current.map_or(0, |p| p.end_ms + self.rest_gap_ms)
    }

    fn start(&mut self, pattern: HapticPatternId, t: u64) {
        let pb = Playback { pattern, start_ms: t, end_ms: t + pattern.duration_ms() };
        self.current = Some(pb);
        self.started.push(pb);
    }

    fn advance(&mut self, t_now_ms: u64) {
        while let Some(next) = self.pending {
            let free = self.busy_until();
            if free > t_now_ms {
                break;
            }
            self.pending = None;
            self.start(next, free);
        }
    }

    pub fn is_idle(&mut self, t_now_ms: u64) -> bool {
        self.advance(t_now_ms);
        self.pending.is_none() && self.busy_until() <= t_now_ms
    }

    pub fn submit(&mut self, id: HapticPatternId, t_now_ms: u64) -> SubmitOutcome {
        self.advance(t_now_ms);
        if self.pending.is_none() && self.busy_until() <= t_now_ms {
            self.start(id, t_now_ms);
            SubmitOutcome::Accepted
        } else {
            self.pending = Some(id);
            SubmitOutcome::Coalesced
        }
    }

    /// Patterns that started at or before `t_now_ms` since the last poll.
    pub fn poll(&mut self, t_now_ms: u64) -> Vec<Playback> {
        self.advance(t_now_ms);
        std::mem::take(&mut self.started)
    }

    pub fn playing(&self, t_now_ms: u64) -> Option<Playback> {
        self.current.filter(|p| p.start_ms <= t_now_ms && t_now_ms < p.end_ms)
    }

    pub fn pending(&self) -> Option<HapticPatternId> {
        self.pending
    }

    pub fn reset(&mut self) {
        self.current = None;
        self.pending = None;
        self.started.clear();
    }
}

/// Scheduler shared between threads; every call is serialized.
#[derive(Debug, Clone, Default)]
pub struct SharedScheduler(Arc<Mutex<Scheduler>>);

impl SharedScheduler {
    pub fn new(inner: Scheduler) -> Self {
        Self(Arc::new(Mutex::new(inner)))
    }

    pub fn lock(&self) -> MutexGuard<'_, Scheduler> {
        self.0.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn submit(&self, id: HapticPatternId, t_now_ms: u64) -> SubmitOutcome {
        self.lock().submit(id, t_now_ms)
    }

    pub fn poll(&self, t_now_ms: u64) -> Vec<Playback> {
        self.lock().poll(t_now_ms)
    }
}
