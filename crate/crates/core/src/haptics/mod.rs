//! Tactile pattern compilation, linkage kinematics, playback scheduling and
//! the servo wire protocol.

pub mod kinematics;
pub mod patterns;
pub mod render;
pub mod scheduler;
pub mod wire;

pub use kinematics::{
    forward_kinematics, inverse_kinematics, solve_point, solve_position, Calibration, ContactLine, KinematicsError,
    LinkageGeometry, Point, ServoLimits, TempleCalibration,
};
pub use patterns::{compile_pattern, ContactKeyframe, HapticPatternId, PatternTrajectory, Temple};
pub use render::{render, RenderError, ServoCommand, DEFAULT_TICK_HZ};
pub use scheduler::{Playback, Scheduler, SharedScheduler, SubmitOutcome};
pub use wire::{decode_stream, decode_wire, encode_wire, WireError, WireTarget};
