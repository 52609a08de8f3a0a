//! LLM-as-judge adapter: builds a knowledge-injected prompt, calls a
//! chat-completion-style HTTP endpoint, parses the binary decision out of
//! the response, and caches decisions on disk.
//!
//! The prompt injects phase-step relationships and descriptions only — the
//! judge never sees dependencies, gates, or terminal closures. Transports
//! are pluggable: [`HttpTransport`] for live endpoints, [`FixtureTransport`]
//! for fully offline evaluation against recorded responses.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::StepSequence;
use crate::rules::{RuleError, RuleSet};

/// Version tag of the prompt template; cited by reports so judge results
/// can name the exact template they were produced with.
pub const PROMPT_VERSION: &str = "1";

#[derive(Debug, Error)]
pub enum JudgeError {
    #[error("judge unavailable: {0}")]
    Unavailable(String),
    #[error("no JSON object with a boolean \"valid\" field in the judge response")]
    ParseFailure,
    #[error("invalid judge configuration: {0}")]
    Config(String),
    #[error("judge cache: {0}")]
    Cache(String),
    #[error(transparent)]
    Rule(#[from] RuleError),
}

fn default_auth_header() -> String {
    "Authorization".to_string()
}

fn default_auth_scheme() -> String {
    "Bearer".to_string()
}

fn default_timeout() -> u64 {
    30
}

fn default_retries() -> u32 {
    2
}

fn default_backoff_ms() -> u64 {
    250
}

fn default_max_in_flight() -> usize {
    4
}

/// Judge endpoint configuration. The API key is referenced by environment
/// variable name and never stored.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JudgeConfig {
    pub endpoint: String,
    pub model: String,
    /// Column name in reports; defaults to the model name.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_auth_header")]
    pub auth_header: String,
    #[serde(default = "default_auth_scheme")]
    pub auth_scheme: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub retry_backoff_ms: u64,
    pub cache_dir: PathBuf,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    /// Recorded-response fixture file; when set, the client runs offline
    /// against it instead of the endpoint.
    #[serde(default)]
    pub fixtures: Option<PathBuf>,
}

impl JudgeConfig {
    pub fn validate(&self) -> Result<(), JudgeError> {
        if self.timeout_secs == 0 {
            return Err(JudgeError::Config("timeout must be positive".into()));
        }
        if self.endpoint.is_empty() && self.fixtures.is_none() {
            return Err(JudgeError::Config("endpoint or fixtures required".into()));
        }
        Ok(())
    }

    pub fn display_name(&self) -> &str {
        self.name.as_deref().unwrap_or(&self.model)
    }

    pub fn from_json(json: &str) -> Result<Self, JudgeError> {
        let cfg: JudgeConfig =
            serde_json::from_str(json).map_err(|e| JudgeError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// A judge's answer for one sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeDecision {
    pub valid: bool,
    pub explanation: String,
    pub raw_response: String,
    #[serde(default)]
    pub cached: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

/// Wire body for chat-completion-style endpoints; temperature is pinned to
/// zero.
#[derive(Debug, Clone, Serialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f32,
}

/// Something that can answer a chat request with assistant text.
pub trait ChatTransport: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, JudgeError>;
}

/// Cache and fixture key: SHA-256 of `model ‖ prompt`, hex-encoded.
pub fn cache_key(model: &str, prompt: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(model.as_bytes());
    hasher.update(prompt.as_bytes());
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        write!(out, "{byte:02x}").expect("hex formatting");
    }
    out
}

/// Builds the knowledge-injected prompt: the phase name and description,
/// the phase's step list with labels, and the candidate sequence as a
/// numbered list. Ordering rules are deliberately withheld.
pub fn build_prompt(seq: &StepSequence, phase: &str, rs: &RuleSet) -> Result<String, JudgeError> {
    let spec = rs.require_spec(phase)?;
    let phase_id = rs.vocabulary.phase(phase);
    let label = |code: &str| -> String {
        match rs.vocabulary.step(code).and_then(|s| s.label.as_deref()) {
            Some(l) => format!("{code} ({l})"),
            None => code.to_string(),
        }
    };

    let mut p = String::new();
    let phase_name = match phase_id.and_then(|p| p.label.as_deref()) {
        Some(l) => format!("{phase}, \"{l}\""),
        None => phase.to_string(),
    };
    writeln!(
        p,
        "You are reviewing a plan for one phase of a procedural workflow."
    )
    .unwrap();
    writeln!(p).unwrap();
    writeln!(p, "Target phase: {phase_name}").unwrap();
    writeln!(p).unwrap();
    writeln!(p, "Steps that belong to this phase:").unwrap();
    for (i, code) in spec.permitted().iter().enumerate() {
        writeln!(p, "{}. {}", i + 1, label(code)).unwrap();
    }
    writeln!(p).unwrap();
    writeln!(p, "Candidate step sequence, in execution order:").unwrap();
    if seq.is_empty() {
        writeln!(p, "(empty)").unwrap();
    }
    for (i, code) in seq.iter().enumerate() {
        writeln!(p, "{}. {}", i + 1, label(code)).unwrap();
    }
    writeln!(p).unwrap();
    writeln!(
        p,
        "Judge whether executing this sequence can plausibly complete the phase goal."
    )
    .unwrap();
    writeln!(
        p,
        "Answer with a single JSON object: {{\"valid\": true|false, \"explanation\": \"...\"}}"
    )
    .unwrap();
    Ok(p)
}

/// Extracts the first well-formed JSON object containing a boolean
/// `"valid"` field from free text, tolerating surrounding prose.
pub fn extract_decision(text: &str) -> Option<(bool, String)> {
    let bytes = text.as_bytes();
    for start in 0..bytes.len() {
        if bytes[start] != b'{' {
            continue;
        }
        let Some(end) = balanced_end(bytes, start) else {
            continue;
        };
        let candidate = &text[start..=end];
        if let Ok(value) = serde_json::from_str::<serde_json::Value>(candidate) {
            if let Some(valid) = value.get("valid").and_then(|v| v.as_bool()) {
                let explanation = value
                    .get("explanation")
                    .and_then(|v| v.as_str())
                    .unwrap_or_default()
                    .to_string();
                return Some((valid, explanation));
            }
        }
    }
    None
}

/// Index of the brace closing the object that opens at `start`, tracking
/// strings and escapes.
fn balanced_end(bytes: &[u8], start: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

/// Live HTTP transport for chat-completion-style endpoints.
pub struct HttpTransport {
    endpoint: String,
    auth: Option<(String, String)>,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(config: &JudgeConfig) -> Result<Self, JudgeError> {
        let auth = match &config.api_key_env {
            Some(var) => {
                let key = std::env::var(var).map_err(|_| {
                    JudgeError::Config(format!("environment variable {var} is not set"))
                })?;
                let value = if config.auth_scheme.is_empty() {
                    key
                } else {
                    format!("{} {}", config.auth_scheme, key)
                };
                Some((config.auth_header.clone(), value))
            }
            None => None,
        };
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build();
        Ok(HttpTransport {
            endpoint: config.endpoint.clone(),
            auth,
            agent,
        })
    }
}

impl ChatTransport for HttpTransport {
    fn complete(&self, request: &ChatRequest) -> Result<String, JudgeError> {
        let mut req = self.agent.post(&self.endpoint);
        if let Some((header, value)) = &self.auth {
            req = req.set(header, value);
        }
        let body = serde_json::to_string(request).expect("request serializes");
        let response = req
            .set("Content-Type", "application/json")
            .send_string(&body)
            .map_err(|e| JudgeError::Unavailable(e.to_string()))?;
        let text = response
            .into_string()
            .map_err(|e| JudgeError::Unavailable(e.to_string()))?;
        let envelope: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| JudgeError::Unavailable(format!("malformed response body: {e}")))?;
        envelope
            .get("choices")
            .and_then(|c| c.get(0))
            .and_then(|c| c.get("message"))
            .and_then(|m| m.get("content"))
            .and_then(|c| c.as_str())
            .map(str::to_string)
            .ok_or_else(|| {
                JudgeError::Unavailable("response has no choices[0].message.content".into())
            })
    }
}

/// Offline transport answering from recorded responses keyed by
/// [`cache_key`].
pub struct FixtureTransport {
    responses: BTreeMap<String, String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FixtureEntry {
    key: String,
    content: String,
}

impl FixtureTransport {
    pub fn new(responses: BTreeMap<String, String>) -> Self {
        FixtureTransport { responses }
    }

    /// Loads JSONL of `{"key": "<sha256>", "content": "..."}` entries.
    pub fn from_file(path: &Path) -> Result<Self, JudgeError> {
        let text = fs::read_to_string(path)
            .map_err(|e| JudgeError::Config(format!("fixture file {}: {e}", path.display())))?;
        let mut responses = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: FixtureEntry = serde_json::from_str(line)
                .map_err(|e| JudgeError::Config(format!("fixture line {}: {e}", idx + 1)))?;
            responses.insert(entry.key, entry.content);
        }
        Ok(FixtureTransport { responses })
    }

    /// Serializes entries for [`from_file`].
    pub fn render_entries<'a>(entries: impl IntoIterator<Item = (&'a str, &'a str)>) -> String {
        let mut out = String::new();
        for (key, content) in entries {
            let entry = FixtureEntry {
                key: key.to_string(),
                content: content.to_string(),
            };
            out.push_str(&serde_json::to_string(&entry).expect("entry serializes"));
            out.push('\n');
        }
        out
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl ChatTransport for FixtureTransport {
    fn complete(&self, request: &ChatRequest) -> Result<String, JudgeError> {
        let prompt = request
            .messages
            .first()
            .map(|m| m.content.as_str())
            .unwrap_or_default();
        let key = cache_key(&request.model, prompt);
        self.responses
            .get(&key)
            .cloned()
            .ok_or_else(|| JudgeError::Unavailable(format!("no fixture for key {key}")))
    }
}

/// A judge that can decide sequences for the meta-evaluation harness.
///
/// `Ok(Some(valid))` is a decision, `Ok(None)` an abstention (the response
/// could not be parsed), and `Err` means the judge is unavailable and its
/// report column must be marked absent.
pub trait PlanJudge: Sync {
    fn name(&self) -> &str;
    fn decide(
        &self,
        seq: &StepSequence,
        phase: &str,
        rs: &RuleSet,
    ) -> Result<Option<bool>, JudgeError>;
}

/// The caching judge client.
pub struct JudgeClient {
    config: JudgeConfig,
    transport: Box<dyn ChatTransport>,
}

impl JudgeClient {
    /// Builds a client from configuration, selecting the fixture transport
    /// when `fixtures` is set and the HTTP transport otherwise.
    pub fn new(config: JudgeConfig) -> Result<Self, JudgeError> {
        config.validate()?;
        let transport: Box<dyn ChatTransport> = match &config.fixtures {
            Some(path) => Box::new(FixtureTransport::from_file(path)?),
            None => Box::new(HttpTransport::new(&config)?),
        };
        Ok(JudgeClient { config, transport })
    }

    pub fn with_transport(config: JudgeConfig, transport: Box<dyn ChatTransport>) -> Self {
        JudgeClient { config, transport }
    }

    pub fn config(&self) -> &JudgeConfig {
        &self.config
    }

    fn cache_path(&self, key: &str) -> PathBuf {
        self.config.cache_dir.join(format!("{key}.json"))
    }

    fn read_cache(&self, key: &str) -> Option<JudgeDecision> {
        let text = fs::read_to_string(self.cache_path(key)).ok()?;
        let mut decision: JudgeDecision = serde_json::from_str(&text).ok()?;
        decision.cached = true;
        Some(decision)
    }

    fn write_cache(&self, key: &str, decision: &JudgeDecision) -> Result<(), JudgeError> {
        fs::create_dir_all(&self.config.cache_dir).map_err(|e| JudgeError::Cache(e.to_string()))?;
        let tmp = self.config.cache_dir.join(format!(".tmp-{key}"));
        fs::write(
            &tmp,
            serde_json::to_string_pretty(decision).expect("decision serializes"),
        )
        .map_err(|e| JudgeError::Cache(e.to_string()))?;
        fs::rename(&tmp, self.cache_path(key)).map_err(|e| JudgeError::Cache(e.to_string()))
    }

    /// Judges one sequence. Returns the cached decision when the cache key
    /// (model, prompt hash) exists; otherwise calls the transport with
    /// retries and exponential backoff, parses the decision, and caches it.
    pub fn judge(
        &self,
        seq: &StepSequence,
        phase: &str,
        rs: &RuleSet,
    ) -> Result<JudgeDecision, JudgeError> {
        let prompt = build_prompt(seq, phase, rs)?;
        let key = cache_key(&self.config.model, &prompt);
        if let Some(decision) = self.read_cache(&key) {
            return Ok(decision);
        }

        let request = ChatRequest {
            model: self.config.model.clone(),
            messages: vec![ChatMessage {
                role: "user".to_string(),
                content: prompt,
            }],
            temperature: 0.0,
        };
        let mut last_err = JudgeError::Unavailable("no attempts made".into());
        for attempt in 0..=self.config.max_retries {
            match self.transport.complete(&request) {
                Ok(content) => {
                    let Some((valid, explanation)) = extract_decision(&content) else {
                        return Err(JudgeError::ParseFailure);
                    };
                    let decision = JudgeDecision {
                        valid,
                        explanation,
                        raw_response: content,
                        cached: false,
                    };
                    self.write_cache(&key, &decision)?;
                    return Ok(decision);
                }
                Err(e) => {
                    last_err = e;
                    if attempt < self.config.max_retries {
                        let backoff = self.config.retry_backoff_ms << attempt;
                        std::thread::sleep(Duration::from_millis(backoff));
                    }
                }
            }
        }
        Err(last_err)
    }
}

impl PlanJudge for JudgeClient {
    fn name(&self) -> &str {
        self.config.display_name()
    }

    fn decide(
        &self,
        seq: &StepSequence,
        phase: &str,
        rs: &RuleSet,
    ) -> Result<Option<bool>, JudgeError> {
        match self.judge(seq, phase, rs) {
            Ok(decision) => Ok(Some(decision.valid)),
            Err(JudgeError::ParseFailure) => Ok(None),
            Err(e) => Err(e),
        }
    }
}
