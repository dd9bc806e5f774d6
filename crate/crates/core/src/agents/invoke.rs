use std::collections::BTreeMap;
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::mock::{MockAgents, MockError};
use super::prompt::ChatMessage;
use super::spec::AgentSpec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AgentError {
    #[error("agent call timed out after {0} ms")]
    Timeout(u64),
    #[error("endpoint answered HTTP {status}: {body}")]
    EndpointError { status: u16, body: String },
    #[error("endpoint unreachable: {0}")]
    Unreachable(String),
    #[error("malformed endpoint response: {0}")]
    MalformedResponse(String),
    #[error("unknown endpoint {0:?}")]
    UnknownEndpoint(String),
    #[error(transparent)]
    Mock(#[from] MockError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentReply {
    pub content: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub latency_ms: u64,
}

/// Anything that can answer a chat request for an agent.
pub trait AgentBackend: Send + Sync {
    fn complete(
        &self,
        spec: &AgentSpec,
        messages: &[ChatMessage],
    ) -> Result<AgentReply, AgentError>;
}

fn default_timeout_ms() -> u64 {
    30_000
}
fn default_max_in_flight() -> usize {
    4
}

/// An OpenAI-style chat-completions endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub name: String,
    pub base_url: String,
    /// Environment variable holding a bearer token, if the endpoint needs one.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
}

impl EndpointConfig {
    pub fn new(name: impl Into<String>, base_url: impl Into<String>) -> Self {
        EndpointConfig {
            name: name.into(),
            base_url: base_url.into(),
            api_key_env: None,
            timeout_ms: default_timeout_ms(),
            max_in_flight: default_max_in_flight(),
        }
    }

    pub fn completions_url(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }
}

/// Counting gate bounding concurrent calls to one endpoint.
#[derive(Debug)]
struct Gate {
    in_flight: Mutex<usize>,
    freed: Condvar,
    limit: usize,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn new(limit: usize) -> Self {
        Gate {
            in_flight: Mutex::new(0),
            freed: Condvar::new(),
            limit: limit.max(1),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.in_flight.lock().unwrap_or_else(|e| e.into_inner());
        while *n >= self.limit {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.0.in_flight.lock().unwrap_or_else(|e| e.into_inner());
        *n -= 1;
        self.0.freed.notify_one();
    }
}

#[derive(Debug)]
struct Endpoint {
    config: EndpointConfig,
    gate: Gate,
}

/// Body sent to the completions endpoint.
pub fn request_body(spec: &AgentSpec, messages: &[ChatMessage]) -> Value {
    let mut body = json!({
        "model": spec.model_id,
        "messages": messages,
        "temperature": spec.temperature,
        "max_tokens": spec.max_tokens,
        "top_p": spec.top_p,
    });
    if !spec.stop.is_empty() {
        body["stop"] = json!(spec.stop);
    }
    if let Some(seed) = spec.seed {
        body["seed"] = json!(seed);
    }
    body
}

/// Extracts the reply text and token usage from a completions response.
pub fn parse_completion(body: &Value) -> Result<(String, u64, u64), AgentError> {
    let content = body
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| {
            AgentError::MalformedResponse("choices[0].message.content missing".into())
        })?;
    let usage = |k: &str| {
        body.pointer(&format!("/usage/{k}"))
            .and_then(Value::as_u64)
            .unwrap_or(0)
    };
    Ok((
        content.to_string(),
        usage("prompt_tokens"),
        usage("completion_tokens"),
    ))
}

fn http_complete(
    endpoint: &Endpoint,
    spec: &AgentSpec,
    messages: &[ChatMessage],
) -> Result<AgentReply, AgentError> {
    let cfg = &endpoint.config;
    let _permit = endpoint.gate.acquire();
    let started = Instant::now();
    let client = reqwest::blocking::Client::builder()
        .timeout(Duration::from_millis(cfg.timeout_ms))
        .build()
        .map_err(|e| AgentError::Unreachable(e.to_string()))?;
    let mut req = client
        .post(cfg.completions_url())
        .json(&request_body(spec, messages));
    if let Some(var) = &cfg.api_key_env {
        if let Ok(token) = std::env::var(var) {
            req = req.bearer_auth(token);
        }
    }
    let resp = req.send().map_err(|e| {
        if e.is_timeout() {
            AgentError::Timeout(cfg.timeout_ms)
        } else {
            AgentError::Unreachable(e.to_string())
        }
    })?;
    let status = resp.status();
    if !status.is_success() {
        let body = resp.text().unwrap_or_default();
        return Err(AgentError::EndpointError {
            status: status.as_u16(),
            body: body.chars().take(512).collect(),
        });
    }
    let body: Value = resp.json().map_err(|e| {
        if e.is_timeout() {
            AgentError::Timeout(cfg.timeout_ms)
        } else {
            AgentError::MalformedResponse(e.to_string())
        }
    })?;
    let (content, prompt_tokens, completion_tokens) = parse_completion(&body)?;
    Ok(AgentReply {
        content,
        prompt_tokens,
        completion_tokens,
        latency_ms: started.elapsed().as_millis() as u64,
    })
}

fn word_count(s: &str) -> u64 {
    s.split_whitespace().count() as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentMode {
    /// Every agent is answered by the mocks.
    #[default]
    Mock,
    /// Agents on the `mock` endpoint use mocks, the rest go over HTTP.
    Live,
}

/// Routes agent calls to the mocks or to configured endpoints.
#[derive(Debug, Clone, Default)]
pub struct AgentInvoker {
    mode: AgentMode,
    mocks: MockAgents,
    endpoints: BTreeMap<String, Arc<Endpoint>>,
}

impl AgentInvoker {
    pub fn new(mode: AgentMode, mocks: MockAgents) -> Self {
        AgentInvoker {
            mode,
            mocks,
            endpoints: BTreeMap::new(),
        }
    }

    pub fn with_endpoint(mut self, config: EndpointConfig) -> Self {
        let gate = Gate::new(config.max_in_flight);
        self.endpoints
            .insert(config.name.clone(), Arc::new(Endpoint { config, gate }));
        self
    }

    pub fn mode(&self) -> AgentMode {
        self.mode
    }

    pub fn mocks(&self) -> &MockAgents {
        &self.mocks
    }

    fn mock_complete(
        &self,
        spec: &AgentSpec,
        messages: &[ChatMessage],
    ) -> Result<AgentReply, AgentError> {
        let content = self.mocks.reply(spec, messages)?;
        Ok(AgentReply {
            prompt_tokens: messages.iter().map(|m| word_count(&m.content)).sum(),
            completion_tokens: word_count(&content),
            content,
            latency_ms: 0,
        })
    }
}

impl AgentBackend for AgentInvoker {
    fn complete(
        &self,
        spec: &AgentSpec,
        messages: &[ChatMessage],
    ) -> Result<AgentReply, AgentError> {
        if self.mode == AgentMode::Mock || spec.is_mock() {
            return self.mock_complete(spec, messages);
        }
        let endpoint = self
            .endpoints
            .get(&spec.endpoint_ref)
            .ok_or_else(|| AgentError::UnknownEndpoint(spec.endpoint_ref.clone()))?;
        http_complete(endpoint, spec, messages)
    }
}
