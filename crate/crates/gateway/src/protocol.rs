//! JSON messages exchanged on `/session`, tagged by a `type` field.

use serde::{Deserialize, Serialize};

use hapticnav_core::haptics::{HapticPatternId, Temple};
use hapticnav_core::navigator::{GuidanceCue, Path, Pose, ToleranceConfig, TrialMetrics};
use hapticnav_core::policy::{NavCommand, Sensitivity};
use hapticnav_core::scene::SceneSummary;
use hapticnav_core::sim::{Environment, ObstacleState};

/// Who perceives the cues: the connected human, or a simulated wearer with
/// a confusion profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerceptionMode {
    #[default]
    Human,
    Perfect,
    Table1,
}

fn default_env() -> String {
    "empty".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum ClientMessage {
    Start {
        /// Bundled path name or JSON file.
        path: String,
        #[serde(default = "default_env")]
        env: String,
        #[serde(default)]
        perception: PerceptionMode,
        /// Seed for the simulated wearer's misperceptions.
        #[serde(default)]
        seed: u64,
    },
    Steer {
        action: NavCommand,
    },
    SetSensitivity {
        level: Sensitivity,
    },
    Reset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    NotStarted,
    AlreadyStarted,
    BadMessage,
    BadConfig,
    SteerNotAccepted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum ServerMessage {
    SessionStarted {
        path: Path,
        env: Environment,
        tolerance: ToleranceConfig,
        mode: PerceptionMode,
        dt_s: f64,
    },
    PoseUpdate {
        t_s: f64,
        pose: Pose,
        cue: GuidanceCue,
        waypoint_index: usize,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        obstacles: Vec<ObstacleState>,
    },
    CueEvent {
        t_s: f64,
        pattern: HapticPatternId,
        start_ms: u64,
        duration_ms: u64,
        temples: Vec<Temple>,
        keyframes: usize,
    },
    SceneUpdate {
        t_s: f64,
        sensitivity: Sensitivity,
        summary: SceneSummary,
    },
    WaypointReached {
        t_s: f64,
        index: usize,
    },
    TrialComplete {
        t_s: f64,
        completed: bool,
        metrics: TrialMetrics,
    },
    Error {
        code: ErrorCode,
        text: String,
    },
}

impl ServerMessage {
    pub fn error(code: ErrorCode, text: impl Into<String>) -> Self {
        Self::Error { code, text: text.into() }
    }
}

/// What goes on the wire: the message plus its session and tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub session_id: String,
    pub tick: u64,
    #[serde(flatten)]
    pub message: ServerMessage,
}
