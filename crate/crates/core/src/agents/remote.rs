//! Chat-completion client with bounded concurrency and retry.
//!
//! Each choice set is one self-contained request with a single user
//! message; no conversation history is carried between sets.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use rand::Rng;
use serde_json::{json, Map, Value};

use crate::agents::{check_resume, summarize, ChoiceRecord, RecordSink, RemoteConfig, RetryPolicy, RunSummary};
use crate::error::{Error, Result};
use crate::prompt::{parse_choice, prompt_sha256, render_prompt, PromptTemplate};
use crate::schema::{AttributeSchema, ChoiceSet};

/// Longest server-requested wait we honor.
const MAX_RETRY_AFTER: Duration = Duration::from_secs(300);

#[derive(Debug, Clone, PartialEq)]
pub struct TransportError {
    pub message: String,
    pub retryable: bool,
    pub retry_after: Option<Duration>,
}

impl TransportError {
    pub fn fatal(message: impl Into<String>) -> Self {
        TransportError {
            message: message.into(),
            retryable: false,
            retry_after: None,
        }
    }

    pub fn transient(message: impl Into<String>) -> Self {
        TransportError {
            message: message.into(),
            retryable: true,
            retry_after: None,
        }
    }
}

/// Sends one prompt and returns the reply text.
pub trait ChatTransport: Sync {
    fn complete(&self, prompt: &str) -> std::result::Result<String, TransportError>;
}

pub fn request_body(model: &str, params: &Map<String, Value>, prompt: &str) -> Value {
    let mut body = Map::new();
    body.insert("model".into(), Value::String(model.to_string()));
    body.insert("messages".into(), json!([{ "role": "user", "content": prompt }]));
    for (k, v) in params {
        if k != "model" && k != "messages" {
            body.insert(k.clone(), v.clone());
        }
    }
    Value::Object(body)
}

pub fn reply_text(response: &Value) -> Option<&str> {
    response
        .get("choices")?
        .get(0)?
        .get("message")?
        .get("content")?
        .as_str()
}

pub struct HttpTransport {
    client: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    params: Map<String, Value>,
    token: String,
}

impl HttpTransport {
    pub fn new(cfg: &RemoteConfig, token: String) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| Error::AgentConfig(format!("http client: {e}")))?;
        Ok(HttpTransport {
            client,
            endpoint: cfg.endpoint.clone(),
            model: cfg.model.clone(),
            params: cfg.params.clone(),
            token,
        })
    }
}

impl ChatTransport for HttpTransport {
    fn complete(&self, prompt: &str) -> std::result::Result<String, TransportError> {
        let resp = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.token)
            .json(&request_body(&self.model, &self.params, prompt))
            .send()
            .map_err(|e| TransportError::transient(format!("request failed: {e}")))?;
        let status = resp.status();
        if !status.is_success() {
            let retry_after = resp
                .headers()
                .get(reqwest::header::RETRY_AFTER)
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.trim().parse::<f64>().ok())
                .filter(|s| s.is_finite() && *s >= 0.0)
                .map(Duration::from_secs_f64);
            let body = resp.text().unwrap_or_default();
            return Err(TransportError {
                message: format!("HTTP {status}: {}", body.chars().take(200).collect::<String>()),
                retryable: status.as_u16() == 429 || status.is_server_error(),
                retry_after,
            });
        }
        let value: Value = resp
            .json()
            .map_err(|e| TransportError::transient(format!("invalid response body: {e}")))?;
        reply_text(&value)
            .map(str::to_string)
            .ok_or_else(|| TransportError::fatal("response has no choices[0].message.content"))
    }
}

/// Exponential backoff `base * 2^(attempt-1)` capped at the ceiling, with
/// the delay drawn uniformly from its upper half.
pub fn backoff_delay<R: Rng + ?Sized>(policy: &RetryPolicy, attempt: u32, rng: &mut R) -> Duration {
    let exp = policy
        .backoff_base_ms
        .saturating_mul(1u64 << (attempt.saturating_sub(1)).min(32));
    let capped = exp.min(policy.backoff_ceiling_ms);
    let lo = capped / 2;
    Duration::from_millis(if capped > lo {
        rng.random_range(lo..=capped)
    } else {
        capped
    })
}

pub struct Outcome {
    pub reply: std::result::Result<String, TransportError>,
    pub attempts: u32,
    pub latency: Duration,
}

pub fn complete_with_retry<T: ChatTransport + ?Sized>(transport: &T, prompt: &str, policy: &RetryPolicy) -> Outcome {
    let start = Instant::now();
    let mut rng = rand::rng();
    let mut attempt = 0;
    loop {
        attempt += 1;
        match transport.complete(prompt) {
            Ok(text) => {
                return Outcome {
                    reply: Ok(text),
                    attempts: attempt,
                    latency: start.elapsed(),
                }
            }
            Err(e) if !e.retryable || attempt >= policy.max_attempts => {
                return Outcome {
                    reply: Err(e),
                    attempts: attempt,
                    latency: start.elapsed(),
                }
            }
            Err(e) => {
                let wait = e
                    .retry_after
                    .map(|d| d.min(MAX_RETRY_AFTER))
                    .unwrap_or_else(|| backoff_delay(policy, attempt, &mut rng));
                log::debug!("attempt {attempt} failed ({}); retrying in {wait:?}", e.message);
                std::thread::sleep(wait);
            }
        }
    }
}

/// Dispatches pending sets over up to `max_in_flight` worker threads. The
/// calling thread is the only writer to the sink.
pub fn run_remote<T: ChatTransport>(
    design: &[ChoiceSet],
    schema: &AttributeSchema,
    cfg: &RemoteConfig,
    agent_id: &str,
    template: &PromptTemplate,
    sink: &mut RecordSink,
    transport: &T,
) -> Result<RunSummary> {
    let resumed = check_resume(design, sink)?;
    let pending: Vec<(&ChoiceSet, String)> = design
        .iter()
        .filter(|s| !sink.contains(s.id))
        .map(|s| render_prompt(s, schema, template).map(|p| (s, p)))
        .collect::<Result<_>>()?;
    let next = AtomicUsize::new(0);
    let workers = cfg.max_in_flight.min(pending.len()).max(1);
    let mut recorded = 0;
    let mut write_err = None;
    std::thread::scope(|scope| {
        let (tx, rx) = mpsc::channel::<ChoiceRecord>();
        for _ in 0..workers {
            let tx = tx.clone();
            let (pending, next) = (&pending, &next);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((set, prompt)) = pending.get(i) else { break };
                let out = complete_with_retry(transport, prompt, &cfg.retry);
                let (raw_text, chosen_index, error) = match out.reply {
                    Ok(text) => {
                        let parsed = parse_choice(set.id, &text, set.j());
                        (text, parsed.chosen_index, None)
                    }
                    Err(e) => (String::new(), None, Some(e.message)),
                };
                let record = ChoiceRecord {
                    set_id: set.id,
                    raw_text,
                    chosen_index,
                    prompt_sha256: prompt_sha256(prompt),
                    attempts: out.attempts,
                    latency_ms: Some(out.latency.as_millis() as u64),
                    agent_id: agent_id.to_string(),
                    error,
                };
                if tx.send(record).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for record in rx {
            if write_err.is_some() {
                continue;
            }
            match sink.append(&record) {
                Ok(()) => recorded += 1,
                Err(e) => {
                    // Stop handing out work; in-flight requests drain.
                    next.store(usize::MAX / 2, Ordering::Relaxed);
                    write_err = Some(e);
                }
            }
        }
    });
    if let Some(e) = write_err {
        return Err(e);
    }
    Ok(summarize(design, sink, resumed, recorded))
}
