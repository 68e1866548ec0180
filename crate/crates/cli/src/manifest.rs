//! `manifest.json`, written next to every output.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::{CliError, CliResult};

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// Full argument vector; re-running it reproduces the outputs.
    pub argv: Vec<String>,
    pub config_paths: Vec<PathBuf>,
    pub seed: Option<u64>,
    pub output_dir: PathBuf,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new(command: &str, argv: &[String], out: &Path) -> Self {
        Self {
            command: command.into(),
            argv: argv.to_vec(),
            config_paths: Vec::new(),
            seed: None,
            output_dir: out.to_path_buf(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
        }
    }

    pub fn config(mut self, path: Option<&Path>) -> Self {
        self.config_paths.extend(path.map(Path::to_path_buf));
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn write(&self) -> CliResult {
        write_json(&self.output_dir.join("manifest.json"), self)
    }
}

pub fn create_dir(dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_file(path, (text + "\n").as_bytes())
}

pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult {
    std::fs::write(path, bytes).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

/// Read a JSON config file; any failure is a config error.
pub fn read_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}
