//! `hapticnav`: replay logs, compile patterns, run trials and scenarios, and
//! serve live sessions.

mod commands;
mod manifest;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use hapticnav_core::sim::scenario::{DEFAULT_SCENES_PER_KIND, DEFAULT_SUITE_SEED};
use hapticnav_core::sim::{PolicySource, ScenarioKind};

/// Failure of a command; usage and config problems exit 2, everything
/// else 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

pub type CliResult = Result<(), CliError>;

#[derive(Parser)]
#[command(name = "hapticnav", version, about = "Haptic navigation pipeline tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Emit {
    Csv,
    Wire,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Fallback,
    Llm,
    Transcript,
}

impl From<PolicyArg> for PolicySource {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Fallback => PolicySource::Fallback,
            PolicyArg::Llm => PolicySource::Llm,
            PolicyArg::Transcript => PolicySource::Transcript,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a detection log (one JSON frame per line) through perception,
    /// scene consolidation and the policy.
    Replay {
        log: PathBuf,
        /// Replay config JSON (camera, scene, policy).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out/replay")]
        out: PathBuf,
        /// Abort on the first malformed line instead of skipping it.
        #[arg(long)]
        strict: bool,
        #[arg(long, value_enum, default_value = "fallback")]
        policy: PolicyArg,
        /// Recorded responses for `--policy transcript`.
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
    /// Compile a tactile pattern to a keyframe CSV or a servo wire stream.
    CompilePattern {
        id: String,
        #[arg(long, value_enum, default_value = "csv")]
        emit: Emit,
        /// Linkage geometry JSON.
        #[arg(long)]
        geometry: Option<PathBuf>,
        /// Per-temple calibration JSON.
        #[arg(long)]
        calibration: Option<PathBuf>,
        #[arg(long, default_value_t = hapticnav_core::haptics::DEFAULT_TICK_HZ)]
        tick_hz: f64,
        #[arg(long, default_value = "out/patterns")]
        out: PathBuf,
    },
    /// Run seeded closed-loop navigation trials.
    SimNav {
        /// Bundled path name (path1, path2) or JSON file.
        #[arg(long, default_value = "path1")]
        path: String,
        /// Bundled environment name (empty, obstacles) or JSON file.
        #[arg(long, default_value = "empty")]
        env: String,
        /// perfect, table1, or a confusion-matrix CSV.
        #[arg(long, default_value = "table1")]
        perception: String,
        /// Agent parameters JSON.
        #[arg(long)]
        agent: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[arg(long)]
        timeout_s: Option<f64>,
        #[arg(long, default_value = "out/sim-nav")]
        out: PathBuf,
    },
    /// Score a decision-scenario suite against the bundled labels.
    Scenario {
        #[arg(value_parser = parse_kind)]
        kind: ScenarioKind,
        #[arg(long, value_enum, default_value = "fallback")]
        policy: PolicyArg,
        #[arg(long, default_value_t = DEFAULT_SCENES_PER_KIND)]
        trials: usize,
        #[arg(long, default_value_t = DEFAULT_SUITE_SEED)]
        seed: u64,
        /// Recorded responses for `--policy transcript`; defaults to the
        /// bundled synthetic fixture.
        #[arg(long)]
        transcript: Option<PathBuf>,
        /// Policy config JSON (sensitivity, endpoint, model, timeout).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out/scenario")]
        out: PathBuf,
    },
    /// Start the live session gateway.
    Serve {
        #[arg(long)]
        port: Option<u16>,
        /// Gateway config JSON.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn parse_kind(s: &str) -> Result<ScenarioKind, String> {
    s.parse()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let argv: Vec<String> = std::env::args().collect();
    let result = match cli.command {
        Command::Replay { log, config, out, strict, policy, transcript } => {
            commands::replay::run(&argv, &log, config.as_deref(), &out, strict, policy, transcript.as_deref())
        }
        Command::CompilePattern { id, emit, geometry, calibration, tick_hz, out } => {
            commands::pattern::run(&argv, &id, emit, geometry.as_deref(), calibration.as_deref(), tick_hz, &out)
        }
        Command::SimNav { path, env, perception, agent, seed, trials, timeout_s, out } => commands::nav::run(
            &argv,
            &commands::nav::NavArgs { path, env, perception, agent, seed, trials, timeout_s },
            &out,
        ),
        Command::Scenario { kind, policy, trials, seed, transcript, config, out } => {
            commands::scenario::run(&argv, kind, policy, trials, seed, transcript.as_deref(), config.as_deref(), &out)
        }
        Command::Serve { port, config } => commands::serve::run(port, config.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
