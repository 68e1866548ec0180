//! Seeded decision scenes scored against bundled labels.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::camera::{synth_camera, CameraRig};
use super::env::{DynamicObstacle, Environment, StaticObstacle};
use crate::navigator::Pose;
use crate::perception::{assign_cell, map_frame, CameraModel, Column, Row};
use crate::policy::{
    build_prompt, decide, fallback_policy, side_cost, Clock, DecisionError, DecisionSource, LlmClient, NavCommand,
    PolicyConfig, BLOCKED_SIDE_COST,
};
use crate::scene::{SceneBuilder, SceneSummary, DEFAULT_HAZARD_DISTANCE_M, DEFAULT_PERSISTENCE, DEFAULT_WINDOW};

pub const DEFAULT_SUITE_SEED: u64 = 2025;
pub const DEFAULT_SCENES_PER_KIND: usize = 20;
pub const SCENE_FRAMES: usize = DEFAULT_WINDOW;
pub const FRAME_INTERVAL_MS: u64 = 100;

pub const LABELS_JSON: &str = include_str!("../../data/scenarios/labels.json");
/// Hand-written stand-in responses used to exercise transcript replay; not
/// output of a real model.
pub const SYNTHETIC_TRANSCRIPT_JSON: &str = include_str!("../../data/scenarios/synthetic_transcript.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScenarioKind {
    OpenSpace,
    StaticObstacles,
    DynamicObstacles,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] = [Self::OpenSpace, Self::StaticObstacles, Self::DynamicObstacles];

    pub fn slug(self) -> &'static str {
        match self {
            Self::OpenSpace => "open",
            Self::StaticObstacles => "static",
            Self::DynamicObstacles => "dynamic",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['_', '-'], "").as_str() {
            "open" | "openspace" => Ok(Self::OpenSpace),
            "static" | "staticobstacles" => Ok(Self::StaticObstacles),
            "dynamic" | "dynamicobstacles" => Ok(Self::DynamicObstacles),
            _ => Err(format!("unknown scenario `{s}` (expected open, static or dynamic)")),
        }
    }
}

/// One scene: the wearer's pose and the room around it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionScene {
    pub scene_id: String,
    pub kind: ScenarioKind,
    pub pose: Pose,
    pub env: Environment,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneLabel {
    pub scene_id: String,
    pub expected_command: NavCommand,
}

pub fn bundled_labels() -> Vec<SceneLabel> {
    serde_json::from_str(LABELS_JSON).expect("bundled labels parse")
}

pub fn scene_id(kind: ScenarioKind, seed: u64, index: usize) -> String {
    format!("{}-s{}-{:02}", kind.slug(), seed, index)
}

fn scene_rng(kind: ScenarioKind, seed: u64, index: usize) -> ChaCha8Rng {
    let k = ScenarioKind::ALL.iter().position(|x| *x == kind).unwrap_or(0) as u64;
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1_000_003).wrapping_add(k * 10_007).wrapping_add(index as u64))
}

/// Wearer pose used by every scene: near one wall, facing into the room.
pub fn scene_pose() -> Pose {
    Pose::new(3.0, 0.5, 90.0)
}

const LABEL_POOL: [&str; 5] = ["chair", "box", "trash can", "plant", "table"];

fn radius_for(label: &str) -> f64 {
    match label {
        "table" => 0.3,
        "box" => 0.2,
        "plant" => 0.2,
        _ => 0.25,
    }
}

fn polar(pose: &Pose, az_deg: f64, d: f64) -> [f64; 2] {
    let a = (pose.heading_deg + az_deg).to_radians();
    [pose.x_m + d * a.cos(), pose.y_m + d * a.sin()]
}

/// Summary the perception pipeline builds from the scene's frames.
pub fn scene_summary(scene: &DecisionScene, cam: &CameraModel, rig: &CameraRig) -> SceneSummary {
    let mut builder = SceneBuilder::new(DEFAULT_WINDOW, DEFAULT_PERSISTENCE, DEFAULT_HAZARD_DISTANCE_M)
        .expect("default window is valid");
    for k in 0..SCENE_FRAMES {
        let t_ms = k as u64 * FRAME_INTERVAL_MS;
        let obstacles = scene.env.obstacles_at(t_ms as f64 / 1000.0);
        let frame = synth_camera(&obstacles, &scene.pose, cam, rig, k as u64 + 1, t_ms);
        if let Ok(mapped) = map_frame(&frame, cam) {
            let _ = builder.push(mapped);
        }
    }
    builder.summary()
}

/// Reject scenes whose label could flip under small perturbations: every
/// obstacle visible in every frame, centroids clear of column boundaries,
/// hazard ranges clear of the threshold, side costs clear of ties and of the
/// blocking level.
fn well_separated(scene: &DecisionScene, expected_objects: usize, cam: &CameraModel, rig: &CameraRig) -> bool {
    let mut cells = Vec::new();
    for k in 0..SCENE_FRAMES {
        let t_s = (k as u64 * FRAME_INTERVAL_MS) as f64 / 1000.0;
        let frame = synth_camera(&scene.env.obstacles_at(t_s), &scene.pose, cam, rig, 1, 0);
        if frame.detections.len() != expected_objects {
            return false;
        }
        let mut frame_cells = Vec::new();
        for d in &frame.detections {
            let (cx, _) = d.bbox.centroid();
            if (cx - 1.0 / 3.0).abs() < 0.03 || (cx - 2.0 / 3.0).abs() < 0.03 {
                return false;
            }
            let cell = assign_cell(&d.bbox);
            let dist = d.true_distance_m.unwrap_or(f64::NAN);
            if cell.column == Column::Center && (dist - DEFAULT_HAZARD_DISTANCE_M).abs() < 0.1 {
                return false;
            }
            frame_cells.push((d.label.clone(), cell));
        }
        frame_cells.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.to_string().cmp(&b.1.to_string())));
        let before = frame_cells.len();
        frame_cells.dedup();
        if frame_cells.len() != before {
            return false;
        }
        cells.push(frame_cells);
    }
    if cells.windows(2).any(|w| w[0] != w[1]) {
        return false;
    }
    let summary = scene_summary(scene, cam, rig);
    if summary.objects.len() != expected_objects || summary.objects.iter().any(|o| o.cell.row != Row::Bottom) {
        return false;
    }
    let (l, r) = (side_cost(&summary, Column::Left), side_cost(&summary, Column::Right));
    let near_block = |c: f64| (c - BLOCKED_SIDE_COST).abs() < 0.1;
    if near_block(l) || near_block(r) {
        return false;
    }
    let both_blocked = l >= BLOCKED_SIDE_COST && r >= BLOCKED_SIDE_COST;
    let exact_empty_tie = l == 0.0 && r == 0.0;
    both_blocked || exact_empty_tie || (l - r).abs() >= 0.1
}

fn open_scene(rng: &mut ChaCha8Rng, pose: &Pose, room: &Environment) -> Vec<StaticObstacle> {
    let n = rng.random_range(0..=2);
    let mut out = Vec::new();
    while out.len() < n {
        let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let az = side * rng.random_range(50.0..100.0);
        let d = rng.random_range(0.6..2.5);
        let label = LABEL_POOL[rng.random_range(0..LABEL_POOL.len())];
        let [x, y] = polar(pose, az, d);
        let r = radius_for(label);
        if room.room.contains(x, y) && x > r && y > r {
            out.push(StaticObstacle { x, y, radius_m: r, label: label.into(), height_m: None });
        }
    }
    out
}

/// Obstacle placements for one candidate scene.
struct Placement {
    label: String,
    az_deg: f64,
    dist_m: f64,
    radius_m: f64,
}

fn obstacle_layout(rng: &mut ChaCha8Rng, target: NavCommand) -> Vec<Placement> {
    let mut out = Vec::new();
    let place = |rng: &mut ChaCha8Rng, az_deg: f64, dist_m: f64| Placement {
        label: LABEL_POOL[rng.random_range(0..LABEL_POOL.len())].to_string(),
        az_deg,
        dist_m,
        radius_m: rng.random_range(0.1..0.15),
    };
    if target != NavCommand::Forward {
        let (az, d) = (rng.random_range(-4.0..4.0), rng.random_range(0.6..0.88));
        out.push(place(rng, az, d));
    } else if rng.random_bool(0.6) {
        let (az, d) = (rng.random_range(-4.0..4.0), rng.random_range(1.2..4.0));
        out.push(place(rng, az, d));
    }
    for sign in [1.0, -1.0] {
        if target == NavCommand::Stop {
            if rng.random_bool(0.5) {
                let (az, d) = (sign * rng.random_range(17.0..27.0), rng.random_range(0.35..0.45));
                out.push(place(rng, az, d));
            } else {
                for band in [17.0..20.0, 24.0..27.0] {
                    let (az, d) = (sign * rng.random_range(band), rng.random_range(0.7..0.92));
                    out.push(place(rng, az, d));
                }
            }
        } else {
            for _ in 0..rng.random_range(0..=2) {
                let (az, d) = (sign * rng.random_range(17.0..27.0), rng.random_range(0.5..4.2));
                out.push(place(rng, az, d));
            }
        }
    }
    out
}

const MAX_ATTEMPTS: usize = 100_000;

/// Deterministic scenes of one kind. Obstacle scenes cycle through target
/// outcomes so each suite mixes left, right, stop and forward answers.
pub fn generate_scenes(kind: ScenarioKind, n: usize, seed: u64) -> Vec<DecisionScene> {
    let cam = CameraModel::default();
    let rig = CameraRig::default();
    let pose = scene_pose();
    let targets = [NavCommand::Left, NavCommand::Right, NavCommand::Stop, NavCommand::Forward];
    (0..n)
        .map(|i| {
            let mut rng = scene_rng(kind, seed, i);
            let base = Environment::empty();
            let scene_id = scene_id(kind, seed, i);
            if kind == ScenarioKind::OpenSpace {
                let mut env = base.clone();
                env.name = scene_id.clone();
                env.static_obstacles = open_scene(&mut rng, &pose, &base);
                return DecisionScene { scene_id, kind, pose, env };
            }
            let target = targets[i % targets.len()];
            for _ in 0..MAX_ATTEMPTS {
                let layout = obstacle_layout(&mut rng, target);
                let mut env = base.clone();
                env.name = scene_id.clone();
                for p in &layout {
                    let [x, y] = polar(&pose, p.az_deg, p.dist_m);
                    let (label, r) = (&p.label, p.radius_m);
                    if kind == ScenarioKind::StaticObstacles {
                        env.static_obstacles.push(StaticObstacle { x, y, radius_m: r, label: label.clone(), height_m: None });
                    } else {
                        let heading = rng.random_range(0.0..std::f64::consts::TAU);
                        let speed = rng.random_range(0.2..0.5);
                        let end = [x + heading.cos(), y + heading.sin()];
                        env.dynamic_obstacles.push(DynamicObstacle {
                            label: label.clone(),
                            radius_m: r,
                            waypoints: vec![[x, y], end],
                            speed_mps: speed,
                            phase_m: 0.0,
                            height_m: None,
                        });
                    }
                }
                if env.validate().is_err() {
                    continue;
                }
                let scene = DecisionScene { scene_id: scene_id.clone(), kind, pose, env };
                if well_separated(&scene, layout.len(), &cam, &rig)
                    && fallback_policy(&scene_summary(&scene, &cam, &rig)) == target
                {
                    return scene;
                }
            }
            panic!("no well-separated {target:?} scene for {scene_id} after {MAX_ATTEMPTS} attempts")
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicySource {
    Fallback,
    Llm,
    Transcript,
}

impl fmt::Display for PolicySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Fallback => "fallback",
            Self::Llm => "llm",
            Self::Transcript => "transcript",
        })
    }
}

impl FromStr for PolicySource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fallback" => Ok(Self::Fallback),
            "llm" => Ok(Self::Llm),
            "transcript" => Ok(Self::Transcript),
            _ => Err(format!("unknown policy `{s}` (expected fallback, llm or transcript)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTrial {
    pub scene_id: String,
    pub prompt: String,
    pub raw_response: Option<String>,
    pub command: NavCommand,
    pub source: DecisionSource,
    pub latency_ms: u64,
    pub expected: Option<NavCommand>,
    pub correct: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub kind: ScenarioKind,
    pub seed: u64,
    pub policy: PolicySource,
    pub trials: Vec<ScenarioTrial>,
    /// Scenes with a bundled label.
    pub scored: usize,
    pub correct: usize,
    /// `None` when no scene could be scored.
    pub accuracy: Option<f64>,
    pub fallback_decisions: usize,
}

/// Run the pipeline on each generated scene and score against `labels`;
/// scenes without a label are reported but not scored.
#[allow(clippy::too_many_arguments)]
pub fn run_decision_scenario(
    kind: ScenarioKind,
    n: usize,
    seed: u64,
    config: &PolicyConfig,
    client: Option<&dyn LlmClient>,
    policy: PolicySource,
    labels: &[SceneLabel],
    clock: &dyn Clock,
) -> Result<ScenarioReport, DecisionError> {
    // without a client every decision is the fallback's; say so
    let policy = if client.is_none() { PolicySource::Fallback } else { policy };
    let cam = CameraModel::default();
    let rig = CameraRig::default();
    let mut trials = Vec::with_capacity(n);
    for scene in generate_scenes(kind, n, seed) {
        let summary = scene_summary(&scene, &cam, &rig);
        let decision = decide(&summary, config, client, clock)?;
        let expected = labels.iter().find(|l| l.scene_id == scene.scene_id).map(|l| l.expected_command);
        trials.push(ScenarioTrial {
            scene_id: scene.scene_id,
            prompt: build_prompt(&summary, config.sensitivity).user_text(),
            raw_response: decision.raw_response,
            command: decision.command,
            source: decision.source,
            latency_ms: decision.latency_ms,
            correct: expected.map(|e| e == decision.command),
            expected,
        });
    }
    let scored = trials.iter().filter(|t| t.expected.is_some()).count();
    let correct = trials.iter().filter(|t| t.correct == Some(true)).count();
    let fallback_decisions = trials.iter().filter(|t| t.source == DecisionSource::Fallback).count();
    Ok(ScenarioReport {
        kind,
        seed,
        policy,
        scored,
        correct,
        accuracy: if scored == 0 { None } else { Some(correct as f64 / scored as f64) },
        fallback_decisions,
        trials,
    })
}
