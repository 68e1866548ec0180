//! Closed-loop navigation trials.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::agent::{step_agent, AgentModel, AgentState};
use super::dispatch::CueDispatcher;
use super::env::Environment;
use super::profile::sample_perceived;
use crate::haptics::scheduler::DEFAULT_REST_GAP_MS;
use crate::haptics::{HapticPatternId, Playback, Scheduler};
use crate::navigator::{compute_metrics, guidance_step, GuidanceCue, GuidanceState, Path, PoseSample, ToleranceConfig, TrialMetrics};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub tick_hz: f64,
    pub timeout_s: f64,
    pub rest_gap_ms: u64,
    pub tolerance: ToleranceConfig,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self { tick_hz: 10.0, timeout_s: 600.0, rest_gap_ms: DEFAULT_REST_GAP_MS, tolerance: ToleranceConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerceivedCue {
    pub t_ms: u64,
    pub actual: HapticPatternId,
    pub perceived: HapticPatternId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub seed: u64,
    pub path: String,
    pub completed: bool,
    pub metrics: TrialMetrics,
    pub cue_log: Vec<Playback>,
    pub perceived_log: Vec<PerceivedCue>,
    pub trajectory: Vec<PoseSample>,
}

pub fn run_navigation_trial(path: &Path, env: &Environment, agent: &AgentModel, cfg: &TrialConfig, seed: u64) -> TrialResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dt = 1.0 / cfg.tick_hz;
    let mut sched = Scheduler::new(cfg.rest_gap_ms);
    let mut dispatcher = CueDispatcher::new();
    let mut state = AgentState::at(path.start_pose());
    let mut nav = GuidanceState::default();
    let mut trajectory = Vec::new();
    let mut cue_log = Vec::new();
    let mut perceived_log = Vec::new();
    let mut completed = false;

    for k in 0u64.. {
        let t_s = k as f64 * dt;
        let t_ms = (t_s * 1000.0).round() as u64;
        trajectory.push(PoseSample { t_s, pose: state.pose });

        let (cue, next_nav) = guidance_step(&state.pose, nav, path, &cfg.tolerance);
        nav = next_nav;
        if cue == GuidanceCue::Finished {
            completed = true;
            break;
        }
        if t_s >= cfg.timeout_s {
            break;
        }
        dispatcher.offer(cue, &state.pose, t_ms, &mut sched);

        let mut perceived = None;
        for pb in sched.poll(t_ms) {
            let p = sample_perceived(pb.pattern, &agent.perception, &mut rng);
            cue_log.push(pb);
            perceived_log.push(PerceivedCue { t_ms: pb.start_ms, actual: pb.pattern, perceived: p });
            perceived = Some(p);
        }

        let mut next = step_agent(agent, &state, perceived, dt);
        let obstacles = env.obstacles_at(t_s + dt);
        if (next.pose.x_m, next.pose.y_m) != (state.pose.x_m, state.pose.y_m)
            && env.blocked(&obstacles, next.pose.x_m, next.pose.y_m, agent.body_radius_m)
        {
            next.pose.x_m = state.pose.x_m;
            next.pose.y_m = state.pose.y_m;
        }
        state = next;
    }

    let metrics = compute_metrics(&trajectory, path, &cfg.tolerance).unwrap_or(TrialMetrics {
        completion_time_s: 0.0,
        pct_time_outside_tolerance: 0.0,
        exit_reenter_count: 0,
        waypoints_reached: 0,
    });
    TrialResult { seed, path: path.name.clone(), completed, metrics, cue_log, perceived_log, trajectory }
}

/// Seed of trial `index` in a batch started from `base_seed`.
pub fn trial_seed(base_seed: u64, index: usize) -> u64 {
    base_seed.wrapping_add(index as u64)
}

/// Independent trials in parallel, returned in index order.
pub fn run_trials(path: &Path, env: &Environment, agent: &AgentModel, cfg: &TrialConfig, base_seed: u64, n: usize) -> Vec<TrialResult> {
    (0..n).into_par_iter().map(|i| run_navigation_trial(path, env, agent, cfg, trial_seed(base_seed, i))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialAggregate {
    pub trials: usize,
    pub completed: usize,
    pub completion_rate: f64,
    /// Over completed trials only.
    pub mean_completion_time_s: Option<f64>,
    pub mean_pct_time_outside: f64,
    pub mean_exit_reenter: f64,
    pub mean_waypoints_reached: f64,
}

pub fn aggregate(results: &[TrialResult]) -> TrialAggregate {
    let n = results.len();
    let done: Vec<&TrialResult> = results.iter().filter(|r| r.completed).collect();
    let mean = |f: &dyn Fn(&TrialResult) -> f64| if n == 0 { 0.0 } else { results.iter().map(f).sum::<f64>() / n as f64 };
    TrialAggregate {
        trials: n,
        completed: done.len(),
        completion_rate: if n == 0 { 0.0 } else { done.len() as f64 / n as f64 },
        mean_completion_time_s: if done.is_empty() {
            None
        } else {
            Some(done.iter().map(|r| r.metrics.completion_time_s).sum::<f64>() / done.len() as f64)
        },
        mean_pct_time_outside: mean(&|r| r.metrics.pct_time_outside_tolerance),
        mean_exit_reenter: mean(&|r| f64::from(r.metrics.exit_reenter_count)),
        mean_waypoints_reached: mean(&|r| r.metrics.waypoints_reached as f64),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::env::StaticObstacle;
    use crate::sim::profile::PerceptionProfile;

    #[test]
    fn perfect_perception_completes_bundled_paths() {
        for (name, n) in [("path1", 6), ("path2", 5)] {
            let p = Path::bundled(name).unwrap();
            let r = run_navigation_trial(&p, &Environment::empty(), &AgentModel::default(), &TrialConfig::default(), 1);
            assert!(r.completed, "{name}");
            assert_eq!(r.metrics.waypoints_reached, n);
            assert!(r.metrics.pct_time_outside_tolerance < 2.0, "{name}: {:?}", r.metrics);
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let p = Path::bundled("path2").unwrap();
        let agent = AgentModel::with_perception(PerceptionProfile::table1());
        let a = run_navigation_trial(&p, &Environment::empty(), &agent, &TrialConfig::default(), 42);
        let b = run_navigation_trial(&p, &Environment::empty(), &agent, &TrialConfig::default(), 42);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn zero_speed_times_out() {
        let p = Path::bundled("path1").unwrap();
        let agent = AgentModel { walk_speed_mps: 0.0, ..AgentModel::default() };
        let cfg = TrialConfig { timeout_s: 30.0, ..TrialConfig::default() };
        let r = run_navigation_trial(&p, &Environment::empty(), &agent, &cfg, 1);
        assert!(!r.completed);
        // only the start waypoint, reached on the first radius check
        assert_eq!(r.metrics.waypoints_reached, 1);
    }

    #[test]
    fn obstacle_on_waypoint_blocks() {
        let p = Path::bundled("path1").unwrap();
        let mut env = Environment::empty();
        env.static_obstacles.push(StaticObstacle { x: 1.0, y: 4.5, radius_m: 0.3, label: "box".into(), height_m: None });
        let cfg = TrialConfig { timeout_s: 60.0, ..TrialConfig::default() };
        let r = run_navigation_trial(&p, &env, &AgentModel::default(), &cfg, 1);
        assert!(!r.completed);
        assert_eq!(r.metrics.waypoints_reached, 1);
    }

    #[test]
    fn cue_spacing_respects_playback() {
        let p = Path::bundled("path1").unwrap();
        let agent = AgentModel::with_perception(PerceptionProfile::table1());
        let r = run_navigation_trial(&p, &Environment::empty(), &agent, &TrialConfig::default(), 3);
        for w in r.cue_log.windows(2) {
            assert!(w[1].start_ms >= w[0].end_ms + DEFAULT_REST_GAP_MS);
        }
    }

    #[test]
    fn batch_is_ordered_and_reproducible() {
        let p = Path::bundled("path2").unwrap();
        let agent = AgentModel::with_perception(PerceptionProfile::table1());
        let a = run_trials(&p, &Environment::empty(), &agent, &TrialConfig::default(), 7, 4);
        let b = run_trials(&p, &Environment::empty(), &agent, &TrialConfig::default(), 7, 4);
        assert_eq!(a, b);
        assert_eq!(a.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![7, 8, 9, 10]);
        let agg = aggregate(&a);
        assert_eq!(agg.trials, 4);
    }
}
