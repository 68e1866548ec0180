use std::path::Path;

use hapticnav_core::policy::{Clock, FrozenClock, LlmClient, MonotonicClock, PolicyConfig, TranscriptClient, TranscriptEntry};
use hapticnav_core::sim::scenario::{bundled_labels, SYNTHETIC_TRANSCRIPT_JSON};
use hapticnav_core::sim::{run_decision_scenario, ScenarioKind};

use crate::manifest::{create_dir, read_config, write_json, RunManifest};
use crate::{CliError, CliResult, PolicyArg};

/// Accuracy of the live model in the original human-labelled video study.
fn reference_accuracy(kind: ScenarioKind) -> f64 {
    match kind {
        ScenarioKind::OpenSpace => 0.918,
        ScenarioKind::StaticObstacles => 0.8461,
        ScenarioKind::DynamicObstacles => 0.815,
    }
}

#[allow(clippy::too_many_arguments)]
pub fn run(
    argv: &[String],
    kind: ScenarioKind,
    policy: PolicyArg,
    trials: usize,
    seed: u64,
    transcript: Option<&Path>,
    config_path: Option<&Path>,
    out: &Path,
) -> CliResult {
    let config: PolicyConfig = config_path.map(read_config).transpose()?.unwrap_or_default();
    let client: Option<Box<dyn LlmClient>> = match (policy, transcript) {
        (PolicyArg::Transcript, None) => {
            let entries: Vec<TranscriptEntry> =
                serde_json::from_str(SYNTHETIC_TRANSCRIPT_JSON).map_err(|e| CliError::Runtime(e.to_string()))?;
            Some(Box::new(TranscriptClient::new(entries)))
        }
        _ => super::policy_client(policy, &config, transcript)?,
    };
    let clock: Box<dyn Clock> = if policy == PolicyArg::Llm { Box::new(MonotonicClock::new()) } else { Box::new(FrozenClock) };

    let report = run_decision_scenario(kind, trials, seed, &config, client.as_deref(), policy.into(), &bundled_labels(), clock.as_ref())
        .map_err(|e| CliError::Runtime(e.to_string()))?;

    create_dir(out)?;
    write_json(&out.join("report.json"), &report)?;
    RunManifest::new("scenario", argv, out).config(config_path).config(transcript).seed(seed).write()?;

    match report.accuracy {
        Some(a) => println!(
            "{kind} ({policy:?}): {}/{} correct, accuracy {:.3}; {} fallback decisions",
            report.correct, report.scored, a, report.fallback_decisions
        ),
        None => println!("{kind}: no labelled scenes for seed {seed}; {} decisions unscored", report.trials.len()),
    }
    if policy == PolicyArg::Llm {
        println!(
            "reference accuracy of the original live-model study: {:.1}% (informational, not a pass criterion)",
            reference_accuracy(kind) * 100.0
        );
    }
    println!("-> {}", out.join("report.json").display());
    Ok(())
}
