//! One connection's simulation: pure state advanced tick by tick.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use hapticnav_core::haptics::{compile_pattern, Scheduler};
use hapticnav_core::navigator::{
    compute_metrics, guidance_step, normalize_deg, GuidanceCue, GuidanceState, Path, PoseSample, TrialMetrics,
};
use hapticnav_core::perception::{map_frame, CameraModel};
use hapticnav_core::policy::{visible_objects, NavCommand, Sensitivity};
use hapticnav_core::scene::{SceneBuilder, SceneSummary, DEFAULT_HAZARD_DISTANCE_M, DEFAULT_PERSISTENCE, DEFAULT_WINDOW};
use hapticnav_core::sim::profile::{sample_perceived, PerceptionProfile};
use hapticnav_core::sim::{
    step_agent, synth_camera, AgentModel, AgentState, CameraRig, CueDispatcher, Environment, TrialConfig,
};

use crate::protocol::{ClientMessage, ErrorCode, PerceptionMode, ServerMessage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    /// Wall-clock ticks per second.
    pub tick_hz: f64,
    /// Simulated seconds per wall-clock second.
    pub time_scale: f64,
    /// Rotation speed of a held left/right steer.
    pub human_turn_rate_dps: f64,
    pub trial: TrialConfig,
    pub agent: AgentModel,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            tick_hz: 20.0,
            time_scale: 1.0,
            human_turn_rate_dps: 90.0,
            trial: TrialConfig::default(),
            agent: AgentModel::default(),
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.tick_hz.is_finite() && self.tick_hz > 0.0) {
            return Err(format!("tick_hz must be positive, got {}", self.tick_hz));
        }
        if !(self.time_scale.is_finite() && self.time_scale > 0.0) {
            return Err(format!("time_scale must be positive, got {}", self.time_scale));
        }
        if !(self.human_turn_rate_dps.is_finite() && self.human_turn_rate_dps >= 0.0) {
            return Err("human_turn_rate_dps must be non-negative".into());
        }
        self.trial.tolerance.validate().map_err(|e| e.to_string())?;
        self.agent.validate()
    }

    /// Simulated seconds advanced per tick.
    pub fn dt_s(&self) -> f64 {
        self.time_scale / self.tick_hz
    }
}

/// Per-trial result written when a trial ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    pub path: String,
    pub env: String,
    pub mode: PerceptionMode,
    pub completed: bool,
    pub metrics: TrialMetrics,
    pub trajectory: Vec<PoseSample>,
}

#[derive(Debug, Clone)]
struct StartParams {
    path: String,
    env: String,
    mode: PerceptionMode,
    seed: u64,
}

struct Run {
    params: StartParams,
    path: Path,
    env: Environment,
    agent: AgentModel,
    state: AgentState,
    nav: GuidanceState,
    sched: Scheduler,
    dispatcher: CueDispatcher,
    rng: ChaCha8Rng,
    builder: SceneBuilder,
    trajectory: Vec<PoseSample>,
    steps: u64,
    action: NavCommand,
    perceived: Option<hapticnav_core::haptics::HapticPatternId>,
    last_scene: Option<SceneSummary>,
    record: Option<SessionRecord>,
}

pub struct Session {
    id: String,
    cfg: SessionConfig,
    sensitivity: Sensitivity,
    tick: u64,
    run: Option<Run>,
    camera: CameraModel,
    rig: CameraRig,
}

impl Session {
    pub fn new(id: impl Into<String>, cfg: SessionConfig) -> Self {
        Self {
            id: id.into(),
            cfg,
            sensitivity: Sensitivity::default(),
            tick: 0,
            run: None,
            camera: CameraModel::default(),
            rig: CameraRig::default(),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// Ticks executed so far.
    pub fn tick_count(&self) -> u64 {
        self.tick
    }

    pub fn is_started(&self) -> bool {
        self.run.is_some()
    }

    /// Started and not yet complete.
    pub fn is_running(&self) -> bool {
        self.run.as_ref().is_some_and(|r| r.record.is_none())
    }

    /// Result of the finished trial, if any.
    pub fn record(&self) -> Option<&SessionRecord> {
        self.run.as_ref().and_then(|r| r.record.as_ref())
    }

    /// Apply one client message; returns any immediate replies. A Steer
    /// replaces the held action, so the newest one before a tick wins.
    pub fn handle(&mut self, msg: ClientMessage) -> Vec<ServerMessage> {
        match msg {
            ClientMessage::Start { path, env, perception, seed } => {
                if self.run.is_some() {
                    return vec![ServerMessage::error(ErrorCode::AlreadyStarted, "session already started; send Reset to restart")];
                }
                self.start(StartParams { path, env, mode: perception, seed })
            }
            ClientMessage::Reset => match self.run.take() {
                Some(run) => self.start(run.params),
                None => vec![ServerMessage::error(ErrorCode::NotStarted, "Reset before Start")],
            },
            ClientMessage::SetSensitivity { level } => {
                self.sensitivity = level;
                if let Some(run) = &mut self.run {
                    run.last_scene = None;
                }
                Vec::new()
            }
            ClientMessage::Steer { action } => match &mut self.run {
                None => vec![ServerMessage::error(ErrorCode::NotStarted, "Steer before Start")],
                Some(run) if run.params.mode != PerceptionMode::Human => vec![ServerMessage::error(
                    ErrorCode::SteerNotAccepted,
                    "the simulated wearer steers itself in this session",
                )],
                Some(run) => {
                    run.action = action;
                    Vec::new()
                }
            },
        }
    }

    fn start(&mut self, params: StartParams) -> Vec<ServerMessage> {
        let path = match Path::resolve(&params.path) {
            Ok(p) => p,
            Err(e) => return vec![ServerMessage::error(ErrorCode::BadConfig, e.to_string())],
        };
        let env = match Environment::resolve(&params.env) {
            Ok(e) => e,
            Err(e) => return vec![ServerMessage::error(ErrorCode::BadConfig, e.to_string())],
        };
        let perception = match params.mode {
            PerceptionMode::Human | PerceptionMode::Perfect => PerceptionProfile::perfect(),
            PerceptionMode::Table1 => PerceptionProfile::table1(),
        };
        let agent = AgentModel { perception, ..self.cfg.agent.clone() };
        let builder = SceneBuilder::new(DEFAULT_WINDOW, DEFAULT_PERSISTENCE, DEFAULT_HAZARD_DISTANCE_M)
            .expect("default window is valid");
        let reply = ServerMessage::SessionStarted {
            path: path.clone(),
            env: env.clone(),
            tolerance: self.cfg.trial.tolerance,
            mode: params.mode,
            dt_s: self.cfg.dt_s(),
        };
        self.run = Some(Run {
            state: AgentState::at(path.start_pose()),
            rng: ChaCha8Rng::seed_from_u64(params.seed),
            params,
            path,
            env,
            agent,
            nav: GuidanceState::default(),
            sched: Scheduler::new(self.cfg.trial.rest_gap_ms),
            dispatcher: CueDispatcher::new(),
            builder,
            trajectory: Vec::new(),
            steps: 0,
            action: NavCommand::Stop,
            perceived: None,
            last_scene: None,
            record: None,
        });
        vec![reply]
    }

    /// Apply pending inputs, then advance one tick.
    pub fn step(&mut self, inputs: impl IntoIterator<Item = ClientMessage>) -> Vec<ServerMessage> {
        let mut out: Vec<ServerMessage> = inputs.into_iter().flat_map(|m| self.handle(m)).collect();
        out.extend(self.tick());
        out
    }

    /// Advance the running trial by one tick. Emits the pose first, then
    /// waypoint arrivals, cues that started this tick, scene changes and
    /// finally the trial result.
    pub fn tick(&mut self) -> Vec<ServerMessage> {
        let dt = self.cfg.dt_s();
        let tol = self.cfg.trial.tolerance;
        let timeout_s = self.cfg.trial.timeout_s;
        let turn_rate = self.cfg.human_turn_rate_dps;
        let Some(run) = self.run.as_mut().filter(|r| r.record.is_none()) else {
            return Vec::new();
        };
        self.tick += 1;
        let mut out = Vec::new();

        if run.steps > 0 {
            let t_prev = (run.steps - 1) as f64 * dt;
            let mut next = if run.params.mode == PerceptionMode::Human {
                let mut s = run.state;
                match run.action {
                    NavCommand::Forward => {
                        let h = s.pose.heading_deg.to_radians();
                        s.pose.x_m += run.agent.walk_speed_mps * dt * h.cos();
                        s.pose.y_m += run.agent.walk_speed_mps * dt * h.sin();
                    }
                    NavCommand::Left => s.pose.heading_deg = normalize_deg(s.pose.heading_deg + turn_rate * dt),
                    NavCommand::Right => s.pose.heading_deg = normalize_deg(s.pose.heading_deg - turn_rate * dt),
                    NavCommand::Stop => {}
                }
                s
            } else {
                step_agent(&run.agent, &run.state, run.perceived.take(), dt)
            };
            let obstacles = run.env.obstacles_at(t_prev + dt);
            if (next.pose.x_m, next.pose.y_m) != (run.state.pose.x_m, run.state.pose.y_m)
                && run.env.blocked(&obstacles, next.pose.x_m, next.pose.y_m, run.agent.body_radius_m)
            {
                next.pose.x_m = run.state.pose.x_m;
                next.pose.y_m = run.state.pose.y_m;
            }
            run.state = next;
        }
        let t_s = run.steps as f64 * dt;
        let t_ms = (t_s * 1000.0).round() as u64;
        run.steps += 1;
        run.trajectory.push(PoseSample { t_s, pose: run.state.pose });

        let before = run.nav.index;
        let (cue, nav) = guidance_step(&run.state.pose, run.nav, &run.path, &tol);
        run.nav = nav;
        let obstacles = run.env.obstacles_at(t_s);
        out.push(ServerMessage::PoseUpdate {
            t_s,
            pose: run.state.pose,
            cue,
            waypoint_index: nav.index,
            obstacles: if run.env.dynamic_obstacles.is_empty() { Vec::new() } else { obstacles.clone() },
        });
        for index in before..nav.index {
            out.push(ServerMessage::WaypointReached { t_s, index });
        }

        run.dispatcher.offer(cue, &run.state.pose, t_ms, &mut run.sched);
        for pb in run.sched.poll(t_ms) {
            let traj = compile_pattern(pb.pattern);
            out.push(ServerMessage::CueEvent {
                t_s,
                pattern: pb.pattern,
                start_ms: pb.start_ms,
                duration_ms: traj.duration_ms,
                temples: traj.temples(),
                keyframes: traj.keyframes.len(),
            });
            if run.params.mode != PerceptionMode::Human {
                run.perceived = Some(sample_perceived(pb.pattern, &run.agent.perception, &mut run.rng));
            }
        }

        let frame = synth_camera(&obstacles, &run.state.pose, &self.camera, &self.rig, run.steps, t_ms);
        if let Ok(mapped) = map_frame(&frame, &self.camera) {
            let _ = run.builder.push(mapped);
        }
        let full = run.builder.summary();
        let summary = SceneSummary {
            objects: visible_objects(&full, self.sensitivity).into_iter().cloned().collect(),
            window_span: full.window_span,
        };
        if run.last_scene.as_ref().map(|s| &s.objects) != Some(&summary.objects) {
            out.push(ServerMessage::SceneUpdate { t_s, sensitivity: self.sensitivity, summary: summary.clone() });
            run.last_scene = Some(summary);
        }

        let finished = cue == GuidanceCue::Finished;
        if finished || t_s >= timeout_s {
            let metrics = compute_metrics(&run.trajectory, &run.path, &tol).unwrap_or(TrialMetrics {
                completion_time_s: t_s,
                pct_time_outside_tolerance: 0.0,
                exit_reenter_count: 0,
                waypoints_reached: nav.index,
            });
            out.push(ServerMessage::TrialComplete { t_s, completed: finished, metrics });
            run.record = Some(SessionRecord {
                session_id: self.id.clone(),
                path: run.path.name.clone(),
                env: run.env.name.clone(),
                mode: run.params.mode,
                completed: finished,
                metrics,
                trajectory: run.trajectory.clone(),
            });
        }
        out
    }
}
