//! Scene summary to navigation command.
//!
//! The primary route renders the summary into a prompt and asks a language
//! model for a one-word directive. Whenever that route fails (no client,
//! timeout, transport error, unparseable answer) and fallback is enabled, a
//! deterministic rule table decides instead.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::perception::{Column, Row};
use crate::scene::{ConsolidatedObject, SceneSummary};

pub const PROMPT_VERSION: &str = "nav-prompt-v1";
pub const SYSTEM_PROMPT: &str = include_str!("../templates/nav_prompt_v1.txt");
pub const NO_OBSTACLES_TEXT: &str = "no obstacles detected";
/// Environment variable holding the language-model API credential.
pub const API_KEY_ENV: &str = "HAPTICNAV_LLM_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sensitivity {
    /// Immediate hazards only.
    Low,
    /// Bottom-row objects and hazards.
    #[default]
    Medium,
    /// Everything in the summary.
    High,
}

impl FromStr for Sensitivity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Ok(Self::Low),
            "medium" => Ok(Self::Medium),
            "high" => Ok(Self::High),
            other => Err(format!("unknown sensitivity `{other}` (expected low, medium or high)")),
        }
    }
}

impl fmt::Display for Sensitivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Low => "low",
            Self::Medium => "medium",
            Self::High => "high",
        })
    }
}

impl Sensitivity {
    pub fn admits(&self, obj: &ConsolidatedObject) -> bool {
        match self {
            Self::Low => obj.immediate_hazard,
            Self::Medium => obj.immediate_hazard || obj.cell.row == Row::Bottom,
            Self::High => true,
        }
    }
}

/// Summary objects visible at a sensitivity level, in priority order.
pub fn visible_objects(summary: &SceneSummary, sensitivity: Sensitivity) -> Vec<&ConsolidatedObject> {
    let mut objs: Vec<&ConsolidatedObject> = summary.objects.iter().filter(|o| sensitivity.admits(o)).collect();
    objs.sort_by(|a, b| {
        crate::perception::priority_order(a.priority, a.distance_m, &a.label, b.priority, b.distance_m, &b.label)
    });
    objs
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NavPrompt {
    pub system_text: String,
    pub scene_text: String,
    pub sensitivity: Sensitivity,
}

impl NavPrompt {
    pub fn user_text(&self) -> String {
        format!("Detected obstacles (sensitivity {}):\n{}", self.sensitivity, self.scene_text)
    }

    /// Stable key for transcript replay.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(PROMPT_VERSION.as_bytes());
        h.update([0]);
        h.update(self.system_text.as_bytes());
        h.update([0]);
        h.update(self.user_text().as_bytes());
        hex::encode(h.finalize())
    }
}

pub fn object_line(obj: &ConsolidatedObject) -> String {
    let dist = match obj.distance_m {
        Some(d) => format!("{d:.1} m"),
        None => "distance unknown".to_string(),
    };
    let mut line = format!("{} at {}, {}", obj.label, obj.cell, dist);
    if obj.immediate_hazard {
        line.push_str(", IMMEDIATE HAZARD");
    }
    line
}

pub fn build_prompt(summary: &SceneSummary, sensitivity: Sensitivity) -> NavPrompt {
    let lines: Vec<String> = visible_objects(summary, sensitivity).into_iter().map(object_line).collect();
    let scene_text = if lines.is_empty() { NO_OBSTACLES_TEXT.to_string() } else { lines.join("\n") };
    NavPrompt { system_text: SYSTEM_PROMPT.trim_end().to_string(), scene_text, sensitivity }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NavCommand {
    Left,
    Right,
    Forward,
    Stop,
}

impl NavCommand {
    pub const ALL: [NavCommand; 4] = [Self::Left, Self::Right, Self::Forward, Self::Stop];
}

impl fmt::Display for NavCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Left => "left",
            Self::Right => "right",
            Self::Forward => "forward",
            Self::Stop => "stop",
        })
    }
}

impl FromStr for NavCommand {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_command(s).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("no navigation keyword in response {0:?}")]
pub struct ParseError(pub String);

fn keyword(word: &str) -> Option<NavCommand> {
    match word {
        "left" => Some(NavCommand::Left),
        "right" => Some(NavCommand::Right),
        "forward" | "straight" | "ahead" => Some(NavCommand::Forward),
        "stop" | "halt" | "wait" => Some(NavCommand::Stop),
        _ => None,
    }
}

/// First whole-word keyword wins, case-insensitive.
pub fn parse_command(text: &str) -> Result<NavCommand, ParseError> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .find_map(|w| keyword(&w.to_lowercase()))
        .ok_or_else(|| ParseError(text.chars().take(200).collect()))
}

/// Side cost assigned to an object whose distance is unknown.
pub const UNKNOWN_DISTANCE_COST: f64 = 2.0;
/// Side cost at or above which a side is considered blocked.
pub const BLOCKED_SIDE_COST: f64 = 2.0;

/// Occupancy cost of one bottom-row side cell: sum of inverse distances.
pub fn side_cost(summary: &SceneSummary, column: Column) -> f64 {
    summary
        .objects
        .iter()
        .filter(|o| o.cell.row == Row::Bottom && o.cell.column == column)
        .map(|o| o.distance_m.map_or(UNKNOWN_DISTANCE_COST, |d| 1.0 / d))
        .sum()
}

/// Deterministic rule table standing in for the language model.
///
/// No immediate hazard: forward. Otherwise steer to the strictly cheaper
/// bottom side; stop when both sides are blocked; an unblocked tie goes left.
pub fn fallback_policy(summary: &SceneSummary) -> NavCommand {
    if !summary.has_immediate_hazard() {
        return NavCommand::Forward;
    }
    let left = side_cost(summary, Column::Left);
    let right = side_cost(summary, Column::Right);
    if left >= BLOCKED_SIDE_COST && right >= BLOCKED_SIDE_COST {
        NavCommand::Stop
    } else if left < right {
        NavCommand::Left
    } else if right < left {
        NavCommand::Right
    } else {
        NavCommand::Left
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecisionSource {
    Llm,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub command: NavCommand,
    pub source: DecisionSource,
    pub latency_ms: u64,
    pub raw_response: Option<String>,
}

fn default_timeout_ms() -> u64 {
    3000
}

fn default_true() -> bool {
    true
}

fn default_endpoint() -> String {
    "https://api.openai.com/v1/chat/completions".to_string()
}

fn default_model() -> String {
    "gpt-4o".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    #[serde(default)]
    pub sensitivity: Sensitivity,
    #[serde(default = "default_endpoint")]
    pub llm_endpoint: String,
    #[serde(default = "default_model")]
    pub llm_model: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_true")]
    pub fallback_enabled: bool,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            sensitivity: Sensitivity::default(),
            llm_endpoint: default_endpoint(),
            llm_model: default_model(),
            timeout_ms: default_timeout_ms(),
            fallback_enabled: true,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("request timed out after {0} ms")]
    Timeout(u64),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("no response available: {0}")]
    Unavailable(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlmReply {
    pub text: String,
    /// Latency reported by the client itself (transcripts replay the recorded
    /// value); measured by the caller when absent.
    pub latency_ms: Option<u64>,
}

pub trait LlmClient: Send + Sync {
    fn complete(&self, prompt: &NavPrompt, timeout: Duration) -> Result<LlmReply, LlmError>;
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecisionError {
    #[error("no language-model client configured and fallback disabled")]
    NoPolicy,
    #[error("language model failed and fallback disabled: {0}")]
    Llm(LlmError),
    #[error("unparseable response and fallback disabled: {0}")]
    Unparseable(ParseError),
}

pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

#[derive(Debug, Clone, Copy)]
pub struct MonotonicClock(Instant);

impl MonotonicClock {
    pub fn new() -> Self {
        Self(Instant::now())
    }
}

impl Default for MonotonicClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for MonotonicClock {
    fn now_ms(&self) -> u64 {
        self.0.elapsed().as_millis() as u64
    }
}

/// Clock that never advances; keeps replayed runs byte-identical.
#[derive(Debug, Clone, Copy, Default)]
pub struct FrozenClock;

impl Clock for FrozenClock {
    fn now_ms(&self) -> u64 {
        0
    }
}

pub fn decide(
    summary: &SceneSummary,
    config: &PolicyConfig,
    client: Option<&dyn LlmClient>,
    clock: &dyn Clock,
) -> Result<Decision, DecisionError> {
    let fallback = |latency_ms: u64, raw_response: Option<String>| Decision {
        command: fallback_policy(summary),
        source: DecisionSource::Fallback,
        latency_ms,
        raw_response,
    };

    let Some(client) = client else {
        return if config.fallback_enabled { Ok(fallback(0, None)) } else { Err(DecisionError::NoPolicy) };
    };

    let prompt = build_prompt(summary, config.sensitivity);
    let start = clock.now_ms();
    let result = client.complete(&prompt, Duration::from_millis(config.timeout_ms));
    let measured = clock.now_ms().saturating_sub(start);

    let reply = result.and_then(|r| {
        let latency = r.latency_ms.unwrap_or(measured);
        if latency > config.timeout_ms {
            Err(LlmError::Timeout(config.timeout_ms))
        } else {
            Ok((r.text, latency))
        }
    });

    match reply {
        Ok((text, latency_ms)) => match parse_command(&text) {
            Ok(command) => Ok(Decision { command, source: DecisionSource::Llm, latency_ms, raw_response: Some(text) }),
            Err(_) if config.fallback_enabled => Ok(fallback(latency_ms, Some(text))),
            Err(e) => Err(DecisionError::Unparseable(e)),
        },
        Err(_) if config.fallback_enabled => Ok(fallback(measured, None)),
        Err(e) => Err(DecisionError::Llm(e)),
    }
}

/// One line of a decision log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub frame_span: Option<(u64, u64)>,
    pub prompt: String,
    pub raw_response: Option<String>,
    pub command: NavCommand,
    pub source: DecisionSource,
    pub latency_ms: u64,
}

impl DecisionRecord {
    pub fn new(summary: &SceneSummary, prompt: &NavPrompt, decision: &Decision) -> Self {
        Self {
            frame_span: summary.window_span,
            prompt: prompt.user_text(),
            raw_response: decision.raw_response.clone(),
            command: decision.command,
            source: decision.source,
            latency_ms: decision.latency_ms,
        }
    }
}

/// Chat-completion client over HTTP with JSON bodies.
pub struct HttpLlmClient {
    endpoint: String,
    model: String,
    api_key: String,
    http: reqwest::blocking::Client,
}

impl HttpLlmClient {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, api_key: impl Into<String>) -> Result<Self, LlmError> {
        let http = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        Ok(Self { endpoint: endpoint.into(), model: model.into(), api_key: api_key.into(), http })
    }

    /// Build from config, reading the credential from [`API_KEY_ENV`].
    pub fn from_env(config: &PolicyConfig) -> Result<Self, LlmError> {
        let key = std::env::var(API_KEY_ENV)
            .map_err(|_| LlmError::Unavailable(format!("environment variable {API_KEY_ENV} is not set")))?;
        Self::new(config.llm_endpoint.clone(), config.llm_model.clone(), key)
    }

    pub fn request_body(&self, prompt: &NavPrompt) -> serde_json::Value {
        serde_json::json!({
            "model": self.model,
            "temperature": 0,
            "max_tokens": 16,
            "messages": [
                {"role": "system", "content": prompt.system_text},
                {"role": "user", "content": prompt.user_text()},
            ],
        })
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: Option<String>,
}

impl LlmClient for HttpLlmClient {
    fn complete(&self, prompt: &NavPrompt, timeout: Duration) -> Result<LlmReply, LlmError> {
        let timeout_ms = timeout.as_millis() as u64;
        let resp = self
            .http
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .timeout(timeout)
            .json(&self.request_body(prompt))
            .send()
            .map_err(|e| if e.is_timeout() { LlmError::Timeout(timeout_ms) } else { LlmError::Transport(e.to_string()) })?;
        let status = resp.status();
        if !status.is_success() {
            return Err(LlmError::Transport(format!("HTTP {status}")));
        }
        let body: ChatResponse = resp
            .json()
            .map_err(|e| if e.is_timeout() { LlmError::Timeout(timeout_ms) } else { LlmError::Transport(e.to_string()) })?;
        let text = body
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| LlmError::Transport("response has no message content".into()))?;
        Ok(LlmReply { text, latency_ms: None })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub prompt_sha256: String,
    /// Informational copy of the scene text the response answered.
    #[serde(default)]
    pub scene_text: String,
    pub response: String,
    #[serde(default)]
    pub latency_ms: u64,
}

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("cannot read transcript {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse transcript {path}: {source}")]
    Parse { path: String, source: serde_json::Error },
}

/// Replays recorded responses keyed by prompt digest.
#[derive(Debug, Clone, Default)]
pub struct TranscriptClient {
    entries: HashMap<String, TranscriptEntry>,
}

impl TranscriptClient {
    pub fn new(entries: impl IntoIterator<Item = TranscriptEntry>) -> Self {
        Self { entries: entries.into_iter().map(|e| (e.prompt_sha256.clone(), e)).collect() }
    }

    pub fn load(path: &Path) -> Result<Self, TranscriptError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| TranscriptError::Io { path: path.display().to_string(), source })?;
        let entries: Vec<TranscriptEntry> = serde_json::from_str(&text)
            .map_err(|source| TranscriptError::Parse { path: path.display().to_string(), source })?;
        Ok(Self::new(entries))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl LlmClient for TranscriptClient {
    fn complete(&self, prompt: &NavPrompt, _timeout: Duration) -> Result<LlmReply, LlmError> {
        self.entries
            .get(&prompt.digest())
            .map(|e| LlmReply { text: e.response.clone(), latency_ms: Some(e.latency_ms) })
            .ok_or_else(|| LlmError::Unavailable("prompt not present in transcript".into()))
    }
}

/// Wraps a client and records every successful exchange as a transcript.
pub struct RecordingClient<C> {
    inner: C,
    clock: MonotonicClock,
    log: Mutex<Vec<TranscriptEntry>>,
}

impl<C: LlmClient> RecordingClient<C> {
    pub fn new(inner: C) -> Self {
        Self { inner, clock: MonotonicClock::new(), log: Mutex::new(Vec::new()) }
    }

    pub fn entries(&self) -> Vec<TranscriptEntry> {
        self.log.lock().map(|l| l.clone()).unwrap_or_default()
    }
}

impl<C: LlmClient> LlmClient for RecordingClient<C> {
    fn complete(&self, prompt: &NavPrompt, timeout: Duration) -> Result<LlmReply, LlmError> {
        let start = self.clock.now_ms();
        let reply = self.inner.complete(prompt, timeout)?;
        let latency_ms = reply.latency_ms.unwrap_or_else(|| self.clock.now_ms() - start);
        if let Ok(mut log) = self.log.lock() {
            log.push(TranscriptEntry {
                prompt_sha256: prompt.digest(),
                scene_text: prompt.scene_text.clone(),
                response: reply.text.clone(),
                latency_ms,
            });
        }
        Ok(LlmReply { text: reply.text, latency_ms: Some(latency_ms) })
    }
}
