//! Session behaviour driven directly, without a network.

use hapticnav_core::haptics::HapticPatternId;
use hapticnav_core::navigator::{guidance_step, normalize_deg, GuidanceCue, GuidanceState, Path, Pose, ToleranceConfig};
use hapticnav_core::policy::{NavCommand, Sensitivity};
use hapticnav_core::sim::TrialConfig;
use hapticnav_gateway::{ClientMessage, ErrorCode, PerceptionMode, ServerMessage, Session, SessionConfig};

fn start(path: &str, env: &str, perception: PerceptionMode) -> ClientMessage {
    ClientMessage::Start { path: path.into(), env: env.into(), perception, seed: 1 }
}

fn steer(action: NavCommand) -> ClientMessage {
    ClientMessage::Steer { action }
}

fn pose_of(msgs: &[ServerMessage]) -> (Pose, GuidanceCue, usize) {
    match msgs.first() {
        Some(ServerMessage::PoseUpdate { pose, cue, waypoint_index, .. }) => (*pose, *cue, *waypoint_index),
        other => panic!("tick must open with a PoseUpdate, got {other:?}"),
    }
}

fn cues(msgs: &[ServerMessage]) -> Vec<HapticPatternId> {
    msgs.iter().filter_map(|m| if let ServerMessage::CueEvent { pattern, .. } = m { Some(*pattern) } else { None }).collect()
}

/// Steers toward the next waypoint using only what the server reports.
fn pilot(path: &Path, pose: &Pose, index: usize) -> NavCommand {
    let Some(target) = path.waypoints.get(index) else { return NavCommand::Stop };
    let err = normalize_deg(pose.bearing_to(*target) - pose.heading_deg);
    if err > 5.0 {
        NavCommand::Left
    } else if err < -5.0 {
        NavCommand::Right
    } else {
        NavCommand::Forward
    }
}

#[test]
fn steer_before_start_is_an_error_and_changes_nothing() {
    let mut s = Session::new("s", SessionConfig::default());
    let out = s.handle(steer(NavCommand::Forward));
    assert!(matches!(out.as_slice(), [ServerMessage::Error { code: ErrorCode::NotStarted, .. }]));
    assert!(!s.is_started());
    assert!(s.tick().is_empty());
    assert_eq!(s.tick_count(), 0);
}

#[test]
fn start_reports_the_world_and_bad_names_are_config_errors() {
    let mut s = Session::new("s", SessionConfig::default());
    let out = s.handle(start("path2", "obstacles", PerceptionMode::Human));
    match &out[..] {
        [ServerMessage::SessionStarted { path, env, .. }] => {
            assert_eq!(path.waypoints.len(), 5);
            assert_eq!(env.name, "obstacles");
        }
        other => panic!("{other:?}"),
    }
    assert!(matches!(s.handle(start("path1", "empty", PerceptionMode::Human))[..], [ServerMessage::Error { code: ErrorCode::AlreadyStarted, .. }]));
    let mut t = Session::new("t", SessionConfig::default());
    assert!(matches!(t.handle(start("nowhere", "empty", PerceptionMode::Human))[..], [ServerMessage::Error { code: ErrorCode::BadConfig, .. }]));
    assert!(!t.is_started());
}

#[test]
fn forward_within_tolerance_advances_with_forward_cue() {
    let mut s = Session::new("s", SessionConfig::default());
    s.handle(start("path1", "empty", PerceptionMode::Human));
    let first = s.tick();
    let (p0, _, idx) = pose_of(&first);
    assert_eq!(idx, 1);
    assert!(first.iter().any(|m| matches!(m, ServerMessage::WaypointReached { index: 0, .. })));
    let mut last = p0;
    for _ in 0..10 {
        let out = s.step([steer(NavCommand::Forward)]);
        let (p, cue, _) = pose_of(&out);
        assert!(p.y_m > last.y_m);
        assert_eq!(cue, GuidanceCue::SlideFront);
        last = p;
    }
    assert!((last.y_m - p0.y_m - 10.0 * 0.8 * 0.05).abs() < 1e-9);
}

#[test]
fn turning_past_heading_tolerance_cues_right() {
    let path = Path::bundled("path1").unwrap();
    let tol = ToleranceConfig::default();
    let mut s = Session::new("s", SessionConfig::default());
    s.handle(start("path1", "empty", PerceptionMode::Human));
    s.tick();
    let mut saw_cue_right = false;
    let mut crossed_at = None;
    for k in 0..60 {
        let action = if crossed_at.is_none() { NavCommand::Left } else { NavCommand::Stop };
        let out = s.step([steer(action)]);
        let (pose, cue, _) = pose_of(&out);
        let (expected, _) = guidance_step(&pose, GuidanceState { index: 1 }, &path, &tol);
        assert_eq!(cue, expected, "cue must match the navigator for the same pose");
        let err = normalize_deg(pose.heading_deg - 90.0);
        if err > 15.0 {
            assert_eq!(cue, GuidanceCue::SlideRight);
            crossed_at.get_or_insert(k);
        } else {
            assert_eq!(cue, GuidanceCue::SlideFront);
        }
        saw_cue_right |= cues(&out).contains(&HapticPatternId::SlideRightFast);
    }
    assert!(crossed_at.is_some());
    assert!(saw_cue_right);
}

#[test]
fn entering_waypoint_radius_reports_arrival_and_taps() {
    let path = Path::bundled("path1").unwrap();
    let mut s = Session::new("s", SessionConfig::default());
    s.handle(start("path1", "empty", PerceptionMode::Human));
    let (mut pose, _, mut idx) = pose_of(&s.tick());
    let mut arrival_tick = None;
    let mut tap_after_arrival = false;
    for k in 0..400 {
        let out = s.step([steer(pilot(&path, &pose, idx))]);
        (pose, _, idx) = pose_of(&out);
        if out.iter().any(|m| matches!(m, ServerMessage::WaypointReached { index: 1, .. })) {
            arrival_tick = Some(k);
            assert!(pose.dist_to(path.waypoints[1]) <= 0.3);
        }
        if arrival_tick.is_some() && cues(&out).contains(&HapticPatternId::TapFront) {
            tap_after_arrival = true;
            break;
        }
    }
    assert!(arrival_tick.is_some() && tap_after_arrival);
}

#[test]
fn piloted_trial_completes_with_ordered_gated_messages() {
    let path = Path::bundled("path2").unwrap();
    let cfg = SessionConfig::default();
    let mut s = Session::new("s", cfg.clone());
    s.handle(start("path2", "empty", PerceptionMode::Human));
    let (mut pose, mut idx) = (path.start_pose(), 0);
    let mut reached = Vec::new();
    let mut playbacks: Vec<(u64, u64)> = Vec::new();
    let mut last_t = -1.0;
    let mut complete = None;
    for _ in 0..20_000 {
        let out = s.step([steer(pilot(&path, &pose, idx))]);
        let (p, _, i) = pose_of(&out);
        let ServerMessage::PoseUpdate { t_s, .. } = out[0] else { unreachable!() };
        assert!(t_s > last_t);
        last_t = t_s;
        (pose, idx) = (p, i);
        for m in &out[1..] {
            match m {
                ServerMessage::PoseUpdate { .. } => panic!("one pose per tick"),
                ServerMessage::WaypointReached { index, .. } => reached.push(*index),
                ServerMessage::CueEvent { start_ms, duration_ms, .. } => playbacks.push((*start_ms, *duration_ms)),
                ServerMessage::TrialComplete { completed, metrics, .. } => complete = Some((*completed, *metrics)),
                _ => {}
            }
        }
        if complete.is_some() {
            break;
        }
    }
    let (completed, metrics) = complete.expect("trial finished");
    assert!(completed);
    assert_eq!(reached, vec![0, 1, 2, 3, 4]);
    assert_eq!(metrics.waypoints_reached, 5);
    for w in playbacks.windows(2) {
        assert!(w[1].0 >= w[0].0 + w[0].1 + cfg.trial.rest_gap_ms, "{w:?}");
    }
    assert!(s.record().is_some_and(|r| r.completed));
    assert!(s.tick().is_empty(), "no ticks after completion");
}

#[test]
fn scripted_wearer_steers_itself() {
    let mut s = Session::new("s", SessionConfig::default());
    s.handle(start("path1", "empty", PerceptionMode::Perfect));
    assert!(matches!(s.handle(steer(NavCommand::Left))[..], [ServerMessage::Error { code: ErrorCode::SteerNotAccepted, .. }]));
    let mut done = None;
    for _ in 0..20_000 {
        if let Some(ServerMessage::TrialComplete { completed, .. }) = s.tick().into_iter().find(|m| matches!(m, ServerMessage::TrialComplete { .. })) {
            done = Some(completed);
            break;
        }
    }
    assert_eq!(done, Some(true));
}

#[test]
fn idle_wearer_times_out() {
    let cfg = SessionConfig { trial: TrialConfig { timeout_s: 2.0, ..TrialConfig::default() }, ..SessionConfig::default() };
    let mut s = Session::new("s", cfg);
    s.handle(start("path1", "empty", PerceptionMode::Human));
    let out: Vec<ServerMessage> = (0..100).flat_map(|_| s.tick()).collect();
    let ends: Vec<_> = out.iter().filter(|m| matches!(m, ServerMessage::TrialComplete { .. })).collect();
    assert!(matches!(ends[..], [ServerMessage::TrialComplete { completed: false, .. }]));
}

#[test]
fn reset_returns_to_the_start() {
    let mut s = Session::new("s", SessionConfig::default());
    assert!(matches!(s.handle(ClientMessage::Reset)[..], [ServerMessage::Error { code: ErrorCode::NotStarted, .. }]));
    s.handle(start("path1", "empty", PerceptionMode::Human));
    let (p0, ..) = pose_of(&s.tick());
    for _ in 0..20 {
        s.step([steer(NavCommand::Forward)]);
    }
    assert!(matches!(s.handle(ClientMessage::Reset)[..], [ServerMessage::SessionStarted { .. }]));
    let (p, ..) = pose_of(&s.tick());
    assert_eq!(p, p0);
}

#[test]
fn scene_updates_follow_sensitivity() {
    let mut s = Session::new("s", SessionConfig::default());
    s.handle(start("path1", "obstacles", PerceptionMode::Human));
    s.handle(ClientMessage::SetSensitivity { level: Sensitivity::High });
    let mut seen_objects = false;
    // face the table (bearing about 37 degrees) and walk up to it
    for _ in 0..12 {
        s.step([steer(NavCommand::Right)]);
    }
    for _ in 0..200 {
        for m in s.step([steer(NavCommand::Forward)]) {
            if let ServerMessage::SceneUpdate { sensitivity, summary, .. } = m {
                assert_eq!(sensitivity, Sensitivity::High);
                seen_objects |= !summary.objects.is_empty();
            }
        }
    }
    assert!(seen_objects);
    s.handle(ClientMessage::SetSensitivity { level: Sensitivity::Low });
    let updates: Vec<_> = s.tick().into_iter().filter(|m| matches!(m, ServerMessage::SceneUpdate { .. })).collect();
    match &updates[..] {
        [ServerMessage::SceneUpdate { sensitivity: Sensitivity::Low, summary, .. }] => {
            assert!(summary.objects.iter().all(|o| o.immediate_hazard));
        }
        other => panic!("{other:?}"),
    }
}
