//! Desk-scale simulator: room, synthetic camera, confusion-model wearer and
//! closed-loop trials.

pub mod agent;
pub mod camera;
pub mod dispatch;
pub mod env;
pub mod profile;
pub mod scenario;
pub mod trial;

pub use agent::{step_agent, AgentModel, AgentState};
pub use camera::{synth_camera, CameraRig};
pub use dispatch::{nav_pattern, CueDispatcher};
pub use env::{DynamicObstacle, Environment, ObstacleState, Room, StaticObstacle};
pub use profile::{sample_perceived, PerceptionProfile};
pub use trial::{aggregate, run_navigation_trial, run_trials, TrialAggregate, TrialConfig, TrialResult};
pub use scenario::{generate_scenes, run_decision_scenario, DecisionScene, PolicySource, ScenarioKind, ScenarioReport, SceneLabel};
