//! Batch client for OpenAI-compatible chat-completions endpoints.
//!
//! Every prompt is sent once under a single [`DecodingConfig`]. Requests run
//! concurrently up to `max_in_flight`, but records come back in prompt order.

use std::time::Duration;

use futures::stream::{self, StreamExt};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tcpure_core::corpus::{RequestMeta, PROMPT_TEMPLATE};
use tcpure_core::{DecodingConfig, GenerationRecord, PromptRecord};

#[cfg(feature = "mock-server")]
pub mod mock;

/// Environment variable holding the bearer token, if any.
pub const API_KEY_ENV: &str = "TCPURE_API_KEY";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid endpoint configuration: {0}")]
    Config(String),
    #[error("endpoint {url} unreachable: {message}")]
    Unreachable { url: String, message: String },
    #[error("HTTP client setup failed: {0}")]
    Client(String),
}

/// Wire name for the repetition penalty. Servers disagree on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyField {
    #[default]
    RepetitionPenalty,
    FrequencyPenalty,
}

impl PenaltyField {
    pub fn as_str(self) -> &'static str {
        match self {
            PenaltyField::RepetitionPenalty => "repetition_penalty",
            PenaltyField::FrequencyPenalty => "frequency_penalty",
        }
    }
}

impl std::str::FromStr for PenaltyField {
    type Err = RunError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "repetition_penalty" => Ok(PenaltyField::RepetitionPenalty),
            "frequency_penalty" => Ok(PenaltyField::FrequencyPenalty),
            other => Err(RunError::Config(format!(
                "unknown penalty field `{other}` (expected repetition_penalty or frequency_penalty)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EndpointSpec {
    /// Server root; `/v1/...` is appended.
    pub base_url: String,
    pub model_name: String,
    pub api_key: Option<String>,
    /// Per-request timeout.
    pub timeout: Duration,
    pub max_in_flight: usize,
    /// Retries after the first attempt.
    pub max_retries: u32,
    pub backoff_base: Duration,
    pub backoff_cap: Duration,
    pub penalty_field: PenaltyField,
}

impl EndpointSpec {
    pub fn new(base_url: &str, model_name: &str) -> Self {
        EndpointSpec {
            base_url: base_url.trim_end_matches('/').to_string(),
            model_name: model_name.to_string(),
            api_key: None,
            timeout: Duration::from_secs(120),
            max_in_flight: 4,
            max_retries: 5,
            backoff_base: Duration::from_millis(500),
            backoff_cap: Duration::from_secs(30),
            penalty_field: PenaltyField::default(),
        }
    }

    pub fn validate(&self) -> Result<(), RunError> {
        if self.max_in_flight == 0 {
            return Err(RunError::Config("max_in_flight must be at least 1".into()));
        }
        if self.timeout.is_zero() {
            return Err(RunError::Config("timeout must be positive".into()));
        }
        if self.model_name.is_empty() {
            return Err(RunError::Config("model name is empty".into()));
        }
        let url = reqwest::Url::parse(&self.base_url)
            .map_err(|e| RunError::Config(format!("base_url `{}`: {e}", self.base_url)))?;
        if !matches!(url.scheme(), "http" | "https") {
            return Err(RunError::Config(format!("base_url `{}` is not http(s)", self.base_url)));
        }
        Ok(())
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base_url.trim_end_matches('/'))
    }

    /// Full-jitter delay before retry number `retry` (0-based).
    fn backoff(&self, retry: u32) -> Duration {
        let exp = self.backoff_base.saturating_mul(2u32.saturating_pow(retry.min(30)));
        let ceiling = exp.min(self.backoff_cap);
        if ceiling.is_zero() {
            return ceiling;
        }
        let nanos = rand::rng().random_range(0..=ceiling.as_nanos().min(u64::MAX as u128) as u64);
        Duration::from_nanos(nanos)
    }
}

/// The chat-completions request body for one prompt.
pub fn request_body(model: &str, prompt_text: &str, decoding: &DecodingConfig, penalty: PenaltyField) -> Value {
    let mut body = json!({
        "model": model,
        "messages": [{"role": "user", "content": prompt_text}],
        "temperature": decoding.temperature,
        "top_p": decoding.top_p,
        "max_tokens": decoding.max_new_tokens,
    });
    body[penalty.as_str()] = json!(decoding.repetition_penalty);
    body
}

enum Attempt {
    Done(String),
    Retryable(String),
    Fatal(String),
}

pub struct Runner {
    client: reqwest::Client,
    spec: EndpointSpec,
}

impl Runner {
    pub fn new(spec: EndpointSpec) -> Result<Self, RunError> {
        spec.validate()?;
        let client = reqwest::Client::builder()
            .timeout(spec.timeout)
            .build()
            .map_err(|e| RunError::Client(e.to_string()))?;
        Ok(Runner { client, spec })
    }

    pub fn spec(&self) -> &EndpointSpec {
        &self.spec
    }

    fn authorized(&self, req: reqwest::RequestBuilder) -> reqwest::RequestBuilder {
        match &self.spec.api_key {
            Some(key) => req.bearer_auth(key),
            None => req,
        }
    }

    /// One `GET /v1/models`. Any HTTP status counts as reachable.
    pub async fn probe(&self) -> Result<(), RunError> {
        let url = self.spec.url("/v1/models");
        match self.authorized(self.client.get(&url)).send().await {
            Ok(resp) => {
                log::debug!("probe {url}: {}", resp.status());
                Ok(())
            }
            Err(e) => Err(RunError::Unreachable {
                url,
                message: error_chain(&e),
            }),
        }
    }

    /// Probe the endpoint, then generate once per prompt.
    ///
    /// Always returns exactly one record per prompt, in prompt order. Prompts
    /// that fail for good get empty text and `error` set.
    pub async fn run_benchmark(
        &self,
        prompts: &[PromptRecord],
        decoding: &DecodingConfig,
        run_id: &str,
    ) -> Result<Vec<GenerationRecord>, RunError> {
        decoding.validate().map_err(|e| RunError::Config(e.to_string()))?;
        self.probe().await?;
        let records: Vec<GenerationRecord> = stream::iter(prompts.iter().map(|p| self.generate(p, decoding, run_id)))
            .buffered(self.spec.max_in_flight)
            .collect()
            .await;
        debug_assert_eq!(records.len(), prompts.len());
        Ok(records)
    }

    async fn generate(&self, prompt: &PromptRecord, decoding: &DecodingConfig, run_id: &str) -> GenerationRecord {
        let body = request_body(
            &self.spec.model_name,
            &prompt.prompt_text(),
            decoding,
            self.spec.penalty_field,
        );
        let mut attempts = 0u32;
        let outcome = loop {
            attempts += 1;
            match self.attempt(&body).await {
                Attempt::Done(text) => break Ok(text),
                Attempt::Fatal(msg) => break Err(msg),
                Attempt::Retryable(msg) => {
                    if attempts > self.spec.max_retries {
                        break Err(format!("gave up after {attempts} attempts: {msg}"));
                    }
                    log::warn!("prompt {}: attempt {attempts} failed ({msg}), retrying", prompt.id);
                    tokio::time::sleep(self.spec.backoff(attempts - 1)).await;
                }
            }
        };
        log::info!(
            "prompt {}: {} after {attempts} attempt(s)",
            prompt.id,
            if outcome.is_ok() { "ok" } else { "failed" }
        );
        let (text, error) = match outcome {
            Ok(t) => (t, None),
            Err(e) => (String::new(), Some(e)),
        };
        let mut rec = GenerationRecord::new(&prompt.id, &self.spec.model_name, run_id, &text, *decoding);
        rec.error = error;
        rec.request = Some(RequestMeta {
            penalty_field: self.spec.penalty_field.as_str().to_string(),
            prompt_template: PROMPT_TEMPLATE.to_string(),
            attempts,
        });
        rec
    }

    async fn attempt(&self, body: &Value) -> Attempt {
        let url = self.spec.url("/v1/chat/completions");
        let resp = match self.authorized(self.client.post(&url)).json(body).send().await {
            Ok(r) => r,
            Err(e) => return Attempt::Retryable(error_chain(&e)),
        };
        let status = resp.status();
        let text = match resp.text().await {
            Ok(t) => t,
            Err(e) => return Attempt::Retryable(error_chain(&e)),
        };
        if status.as_u16() == 429 || status.is_server_error() {
            return Attempt::Retryable(format!("HTTP {}", status.as_u16()));
        }
        if !status.is_success() {
            return Attempt::Fatal(format!("HTTP {}: {}", status.as_u16(), truncate(&text, 200)));
        }
        match extract_content(&text) {
            Some(content) => Attempt::Done(content),
            None => Attempt::Fatal(format!(
                "response lacks choices[0].message.content: {}",
                truncate(&text, 200)
            )),
        }
    }
}

fn extract_content(body: &str) -> Option<String> {
    let v: Value = serde_json::from_str(body).ok()?;
    v.get("choices")?
        .get(0)?
        .get("message")?
        .get("content")?
        .as_str()
        .map(str::to_string)
}

fn truncate(s: &str, max_chars: usize) -> String {
    match s.char_indices().nth(max_chars) {
        Some((i, _)) => format!("{}…", &s[..i]),
        None => s.to_string(),
    }
}

fn error_chain(e: &dyn std::error::Error) -> String {
    let mut msg = e.to_string();
    let mut src = e.source();
    while let Some(s) = src {
        msg.push_str(": ");
        msg.push_str(&s.to_string());
        src = s.source();
    }
    msg
}
