//! Choosers and the experiment runner.
//!
//! An agent is a live chat-completion endpoint ([`remote`]), a utility
//! maximizer with Gumbel noise ([`simulated`]) or a replayer of canned
//! replies ([`scripted`]). [`run_experiment`] drives any of them over a design
//! and persists one [`ChoiceRecord`] per set through an append-only
//! [`RecordSink`].

pub mod remote;
pub mod scripted;
pub mod simulated;
pub mod sink;

use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::beta::{BetaEntry, Coefficients};
use crate::design::DesignSpec;
use crate::error::{Error, Result};
use crate::prompt::{parse_choice, prompt_sha256, render_prompt, PromptTemplate};
use crate::schema::{AttributeSchema, ChoiceSet};

pub use remote::{ChatTransport, HttpTransport, TransportError};
pub use simulated::{simulate_choice, Noise, SimulatedAgent};
pub use sink::{load_records, RecordSink};

pub const DEFAULT_CREDENTIAL_ENV: &str = "OPENAI_API_KEY";
pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub backoff_base_ms: u64,
    pub backoff_ceiling_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 5,
            backoff_base_ms: 500,
            backoff_ceiling_ms: 30_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteConfig {
    #[serde(default = "default_endpoint")]
    pub endpoint: String,
    pub model: String,
    /// Extra request fields (temperature, top_p, ...). Empty means provider defaults.
    #[serde(default)]
    pub params: Map<String, Value>,
    /// Name of the environment variable holding the bearer token.
    #[serde(default = "default_credential_env")]
    pub credential_env: String,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_endpoint() -> String {
    DEFAULT_ENDPOINT.into()
}
fn default_credential_env() -> String {
    DEFAULT_CREDENTIAL_ENV.into()
}
fn default_in_flight() -> usize {
    4
}
fn default_timeout() -> u64 {
    120
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulatedConfig {
    pub beta: Vec<BetaEntry>,
    #[serde(default)]
    pub noise: Noise,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedConfig {
    pub replies_path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AgentConfig {
    Remote(RemoteConfig),
    Simulated(SimulatedConfig),
    Scripted(ScriptedConfig),
}

impl AgentConfig {
    pub fn simulated(schema: &AttributeSchema, beta: &Coefficients, noise: Noise, seed: u64) -> Self {
        AgentConfig::Simulated(SimulatedConfig {
            beta: beta.to_entries(schema),
            noise,
            seed,
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: AgentConfig = serde_json::from_str(text).map_err(|e| Error::json("agent config", e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let AgentConfig::Remote(r) = self {
            if r.max_in_flight == 0 {
                return Err(Error::AgentConfig("max_in_flight must be at least 1".into()));
            }
            if r.retry.max_attempts == 0 {
                return Err(Error::AgentConfig("retry.max_attempts must be at least 1".into()));
            }
            if r.model.trim().is_empty() {
                return Err(Error::AgentConfig("model must not be empty".into()));
            }
            if r.credential_env.trim().is_empty() {
                return Err(Error::AgentConfig("credential_env must not be empty".into()));
            }
        }
        Ok(())
    }

    pub fn agent_id(&self) -> String {
        match self {
            AgentConfig::Remote(r) => format!("remote:{}", r.model),
            AgentConfig::Simulated(s) => format!("simulated:{}:{}", s.noise.as_str(), s.seed),
            AgentConfig::Scripted(s) => format!("scripted:{}", s.replies_path.display()),
        }
    }
}

/// One agent's response to one choice set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceRecord {
    pub set_id: u64,
    pub raw_text: String,
    pub chosen_index: Option<usize>,
    pub prompt_sha256: String,
    pub attempts: u32,
    /// Wall-clock latency; only recorded for remote agents.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<u64>,
    pub agent_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ChoiceRecord {
    pub fn is_effective(&self) -> bool {
        self.chosen_index.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub n_sets: usize,
    /// Sets already present in the sink before this invocation.
    pub resumed: usize,
    pub recorded: usize,
    pub effective: usize,
    pub failed: usize,
    pub response_rate: f64,
}

/// Everything needed to re-issue any prompt of a run byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub design: DesignSpec,
    pub generator: String,
    pub schema_version: String,
    /// Holds the credential variable name, never its value.
    pub agent: AgentConfig,
    pub template_sha256: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub summary: RunSummary,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or_default()
}

/// Collects one record per choice set. Set ids already in `sink` are
/// skipped, so an interrupted run can be resumed by calling this again.
/// Remote failures after all retries become ineffective records; a missing
/// credential aborts before any request.
pub fn run_experiment(
    design: &[ChoiceSet],
    schema: &AttributeSchema,
    agent: &AgentConfig,
    template: &PromptTemplate,
    sink: &mut RecordSink,
) -> Result<RunSummary> {
    agent.validate()?;
    match agent {
        AgentConfig::Remote(cfg) => {
            let token = std::env::var(&cfg.credential_env)
                .ok()
                .filter(|t| !t.trim().is_empty())
                .ok_or_else(|| Error::MissingCredential(cfg.credential_env.clone()))?;
            let transport = HttpTransport::new(cfg, token)?;
            remote::run_remote(design, schema, cfg, &agent.agent_id(), template, sink, &transport)
        }
        AgentConfig::Simulated(cfg) => {
            let beta = Coefficients::from_entries(schema, &cfg.beta)?;
            let sim = SimulatedAgent::new(beta, cfg.noise, cfg.seed);
            let id = agent.agent_id();
            run_local(
                design,
                schema,
                template,
                sink,
                |set, _| Ok(crate::prompt::case_reply(sim.choose(set, schema)?)),
                &id,
            )
        }
        AgentConfig::Scripted(cfg) => {
            let script = scripted::Script::load(&cfg.replies_path)?;
            let id = agent.agent_id();
            run_local(
                design,
                schema,
                template,
                sink,
                |set, i| Ok(script.reply(set.id, i)?.to_string()),
                &id,
            )
        }
    }
}

fn run_local<F>(
    design: &[ChoiceSet],
    schema: &AttributeSchema,
    template: &PromptTemplate,
    sink: &mut RecordSink,
    mut respond: F,
    agent_id: &str,
) -> Result<RunSummary>
where
    F: FnMut(&ChoiceSet, usize) -> Result<String>,
{
    let resumed = check_resume(design, sink)?;
    let mut recorded = 0;
    for (i, set) in design.iter().enumerate() {
        if sink.contains(set.id) {
            continue;
        }
        let prompt = render_prompt(set, schema, template)?;
        let raw = respond(set, i)?;
        let parsed = parse_choice(set.id, &raw, set.j());
        sink.append(&ChoiceRecord {
            set_id: set.id,
            raw_text: raw,
            chosen_index: parsed.chosen_index,
            prompt_sha256: prompt_sha256(&prompt),
            attempts: 1,
            latency_ms: None,
            agent_id: agent_id.to_string(),
            error: None,
        })?;
        recorded += 1;
    }
    Ok(summarize(design, sink, resumed, recorded))
}

/// Fails if the sink holds records for sets outside the design; returns how
/// many design sets are already recorded.
pub(crate) fn check_resume(design: &[ChoiceSet], sink: &RecordSink) -> Result<usize> {
    if design.is_empty() {
        return Err(Error::Empty("design"));
    }
    let ids: std::collections::HashSet<u64> = design.iter().map(|s| s.id).collect();
    if let Some(r) = sink.records().iter().find(|r| !ids.contains(&r.set_id)) {
        return Err(Error::UnknownSet(r.set_id));
    }
    Ok(sink.records().len())
}

pub(crate) fn summarize(design: &[ChoiceSet], sink: &RecordSink, resumed: usize, recorded: usize) -> RunSummary {
    let records = sink.records();
    let effective = records.iter().filter(|r| r.is_effective()).count();
    let failed = records.iter().filter(|r| r.error.is_some()).count();
    RunSummary {
        n_sets: design.len(),
        resumed,
        recorded,
        effective,
        failed,
        response_rate: if records.is_empty() {
            0.0
        } else {
            effective as f64 / records.len() as f64
        },
    }
}
