//! Runs recorded detection logs through perception, scene and policy.

use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::perception::{map_frame, CameraModel, DetectionFrame};
use crate::policy::{build_prompt, decide, Clock, DecisionError, DecisionRecord, LlmClient, PolicyConfig};
use crate::scene::{SceneBuilder, SceneError, DEFAULT_HAZARD_DISTANCE_M, DEFAULT_PERSISTENCE, DEFAULT_WINDOW};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_persistence")]
    pub persistence: usize,
    #[serde(default = "default_hazard")]
    pub hazard_distance_m: f64,
}

fn default_window() -> usize {
    DEFAULT_WINDOW
}
fn default_persistence() -> usize {
    DEFAULT_PERSISTENCE
}
fn default_hazard() -> f64 {
    DEFAULT_HAZARD_DISTANCE_M
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self { window: DEFAULT_WINDOW, persistence: DEFAULT_PERSISTENCE, hazard_distance_m: DEFAULT_HAZARD_DISTANCE_M }
    }
}

/// Everything a replay needs besides the log; every field has a default.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReplayConfig {
    #[serde(default)]
    pub camera: CameraModel,
    #[serde(default)]
    pub scene: SceneConfig,
    #[serde(default)]
    pub policy: PolicyConfig,
}

impl ReplayConfig {
    pub fn load(path: &Path) -> Result<Self, ReplayError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ReplayError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: Self =
            serde_json::from_str(&text).map_err(|e| ReplayError::Config(format!("{}: {e}", path.display())))?;
        cfg.camera.validate().map_err(|e| ReplayError::Config(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("config error: {0}")]
    Config(String),
    #[error("cannot read log: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Decision(#[from] DecisionError),
}

/// A log line that was skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayIssue {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReplayOutput {
    pub decisions: Vec<DecisionRecord>,
    pub issues: Vec<ReplayIssue>,
}

/// Replay a log of one JSON `DetectionFrame` per line. A decision is made for
/// every frame once the window holds enough frames to reach the persistence
/// threshold. Blank lines are ignored; malformed lines are reported and
/// skipped, or abort the replay when `strict`.
pub fn replay_log(
    reader: impl BufRead,
    config: &ReplayConfig,
    client: Option<&dyn LlmClient>,
    clock: &dyn Clock,
    strict: bool,
) -> Result<ReplayOutput, ReplayError> {
    let sc = &config.scene;
    let mut builder = SceneBuilder::new(sc.window, sc.persistence, sc.hazard_distance_m)?;
    let mut out = ReplayOutput::default();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let step = serde_json::from_str::<DetectionFrame>(&line)
            .map_err(|e| e.to_string())
            .and_then(|f| map_frame(&f, &config.camera).map_err(|e| e.to_string()))
            .and_then(|m| builder.push(m).map_err(|e| e.to_string()));
        if let Err(message) = step {
            if strict {
                return Err(ReplayError::Malformed { line: line_no, message });
            }
            out.issues.push(ReplayIssue { line: line_no, message });
            continue;
        }
        if !builder.is_primed() {
            continue;
        }
        let summary = builder.summary();
        let decision = decide(&summary, &config.policy, client, clock)?;
        let prompt = build_prompt(&summary, config.policy.sensitivity);
        out.decisions.push(DecisionRecord::new(&summary, &prompt, &decision));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{FrozenClock, NavCommand};

    fn frame(id: u64, dets: &str) -> String {
        format!(
            r#"{{"frame_id":{id},"timestamp_ms":{},"image_width_px":640,"image_height_px":480,"detections":[{dets}]}}"#,
            id * 100
        )
    }

    const CHAIR_AHEAD: &str = r#"{"label":"chair","bbox":[0.4,0.5,0.6,1.0],"confidence":0.9,"true_distance_m":0.6}"#;

    #[test]
    fn empty_log_gives_no_decisions() {
        let out = replay_log("".as_bytes(), &ReplayConfig::default(), None, &FrozenClock, false).unwrap();
        assert_eq!(out, ReplayOutput::default());
    }

    #[test]
    fn decisions_start_once_primed() {
        let log: String = (1..=5).map(|i| frame(i, CHAIR_AHEAD) + "\n").collect();
        let out = replay_log(log.as_bytes(), &ReplayConfig::default(), None, &FrozenClock, false).unwrap();
        assert_eq!(out.decisions.len(), 3);
        assert!(out.decisions.iter().all(|d| d.command == NavCommand::Left));
        assert_eq!(out.decisions[0].frame_span, Some((1, 3)));
    }

    #[test]
    fn malformed_lines_are_reported_or_fatal() {
        let log = format!("{}\nnot json\n\n{}\n", frame(1, ""), frame(2, r#"{"label":"x","bbox":[0.5,0,0.4,1],"confidence":0.9}"#));
        let out = replay_log(log.as_bytes(), &ReplayConfig::default(), None, &FrozenClock, false).unwrap();
        assert_eq!(out.issues.iter().map(|i| i.line).collect::<Vec<_>>(), vec![2, 4]);
        match replay_log(log.as_bytes(), &ReplayConfig::default(), None, &FrozenClock, true) {
            Err(ReplayError::Malformed { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn out_of_order_frames_are_issues() {
        let log = format!("{}\n{}\n", frame(2, ""), frame(1, ""));
        let out = replay_log(log.as_bytes(), &ReplayConfig::default(), None, &FrozenClock, false).unwrap();
        assert_eq!(out.issues.len(), 1);
        assert_eq!(out.issues[0].line, 2);
    }
}
