use std::fs::File;
use std::path::{Path as FsPath, PathBuf};

use serde::{Deserialize, Serialize};

use hapticnav_core::navigator::{write_trajectory_csv, Path, TrialMetrics};
use hapticnav_core::sim::{aggregate, run_trials, AgentModel, Environment, PerceptionProfile, TrialConfig};

use crate::manifest::{create_dir, read_config, write_file, write_json, RunManifest};
use crate::plot::render_svg;
use crate::{CliError, CliResult};

pub struct NavArgs {
    pub path: String,
    pub env: String,
    pub perception: String,
    pub agent: Option<PathBuf>,
    pub seed: u64,
    pub trials: usize,
    pub timeout_s: Option<f64>,
}

/// Agent parameters read from `--agent`; missing fields keep their defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct AgentOverrides {
    walk_speed_mps: Option<f64>,
    turn_rate_dps: Option<f64>,
    turn_response_s: Option<f64>,
    body_radius_m: Option<f64>,
}

#[derive(Serialize)]
struct TrialRow {
    seed: u64,
    completed: bool,
    metrics: TrialMetrics,
    cues: usize,
}

fn perception(spec: &str) -> Result<PerceptionProfile, CliError> {
    match spec {
        "perfect" => Ok(PerceptionProfile::perfect()),
        "table1" => Ok(PerceptionProfile::table1()),
        file => {
            let f = File::open(file).map_err(|e| {
                CliError::Usage(format!("--perception: expected perfect, table1 or a CSV file; cannot open {file}: {e}"))
            })?;
            PerceptionProfile::from_csv(f, PerceptionProfile::perfect().reaction_latency_ms)
                .map_err(|e| CliError::Usage(format!("{file}: {e}")))
        }
    }
}

fn agent(args: &NavArgs) -> Result<AgentModel, CliError> {
    let o: AgentOverrides = args.agent.as_deref().map(read_config).transpose()?.unwrap_or_default();
    let mut a = AgentModel::with_perception(perception(&args.perception)?);
    a.walk_speed_mps = o.walk_speed_mps.unwrap_or(a.walk_speed_mps);
    a.turn_rate_dps = o.turn_rate_dps.unwrap_or(a.turn_rate_dps);
    a.turn_response_s = o.turn_response_s.unwrap_or(a.turn_response_s);
    a.body_radius_m = o.body_radius_m.unwrap_or(a.body_radius_m);
    a.validate().map_err(CliError::Usage)?;
    Ok(a)
}

pub fn run(argv: &[String], args: &NavArgs, out: &FsPath) -> CliResult {
    let path = Path::resolve(&args.path).map_err(|e| CliError::Usage(format!("--path {}: {e}", args.path)))?;
    let env = Environment::resolve(&args.env).map_err(|e| CliError::Usage(format!("--env {}: {e}", args.env)))?;
    let agent = agent(args)?;
    let mut cfg = TrialConfig::default();
    if let Some(t) = args.timeout_s {
        if !(t.is_finite() && t > 0.0) {
            return Err(CliError::Usage(format!("--timeout-s must be positive, got {t}")));
        }
        cfg.timeout_s = t;
    }
    if args.trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }

    let results = run_trials(&path, &env, &agent, &cfg, args.seed, args.trials);
    let agg = aggregate(&results);
    let rows: Vec<TrialRow> = results
        .iter()
        .map(|r| TrialRow { seed: r.seed, completed: r.completed, metrics: r.metrics, cues: r.cue_log.len() })
        .collect();

    create_dir(out)?;
    write_json(&out.join("results.json"), &rows)?;
    write_json(&out.join("aggregate.json"), &agg)?;
    let first = &results[0];
    let mut csv = Vec::new();
    write_trajectory_csv(&first.trajectory, &mut csv).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_file(&out.join("trajectory.csv"), &csv)?;
    write_file(&out.join("plot.svg"), render_svg(&path, &env, &first.trajectory, cfg.tolerance.pos_tol_m).as_bytes())?;
    RunManifest::new("sim-nav", argv, out).config(args.agent.as_deref()).seed(args.seed).write()?;

    println!(
        "{}/{} trials completed on {} ({}); mean exits {:.2}; mean time outside {:.1}% -> {}",
        agg.completed,
        agg.trials,
        path.name,
        env.name,
        agg.mean_exit_reenter,
        agg.mean_pct_time_outside,
        out.display()
    );
    if let Some(t) = agg.mean_completion_time_s {
        println!("mean completion time {t:.1} s");
    }
    Ok(())
}
