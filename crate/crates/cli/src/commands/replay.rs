use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use hapticnav_core::policy::{Clock, FrozenClock, MonotonicClock};
use hapticnav_core::replay::{replay_log, ReplayConfig, ReplayError};

use crate::manifest::{create_dir, write_json, RunManifest};
use crate::{CliError, CliResult, PolicyArg};

pub fn run(
    argv: &[String],
    log: &Path,
    config_path: Option<&Path>,
    out: &Path,
    strict: bool,
    policy: PolicyArg,
    transcript: Option<&Path>,
) -> CliResult {
    let config = match config_path {
        Some(p) => ReplayConfig::load(p).map_err(|e| CliError::Usage(e.to_string()))?,
        None => ReplayConfig::default(),
    };
    let client = super::policy_client(policy, &config.policy, transcript)?;
    let file = File::open(log).map_err(|e| CliError::Runtime(format!("cannot open {}: {e}", log.display())))?;

    let clock: Box<dyn Clock> = if policy == PolicyArg::Llm { Box::new(MonotonicClock::new()) } else { Box::new(FrozenClock) };
    let output = replay_log(BufReader::new(file), &config, client.as_deref(), clock.as_ref(), strict).map_err(|e| match e {
        ReplayError::Malformed { line, message } => CliError::Runtime(format!("{}:{line}: {message}", log.display())),
        other => CliError::Runtime(other.to_string()),
    })?;
    for issue in &output.issues {
        eprintln!("warning: {}:{}: {} (skipped)", log.display(), issue.line, issue.message);
    }

    create_dir(out)?;
    write_json(&out.join("decisions.json"), &output)?;
    RunManifest::new("replay", argv, out).config(config_path).config(transcript).write()?;
    println!(
        "{} decisions, {} skipped lines -> {}",
        output.decisions.len(),
        output.issues.len(),
        out.join("decisions.json").display()
    );
    Ok(())
}
