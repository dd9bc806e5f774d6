use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentRole {
    Gen,
    Val,
    Debug,
    Chat,
    Custom,
}

impl fmt::Display for AgentRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AgentRole::Gen => "gen",
            AgentRole::Val => "val",
            AgentRole::Debug => "debug",
            AgentRole::Chat => "chat",
            AgentRole::Custom => "custom",
        })
    }
}

pub const MOCK_ENDPOINT: &str = "mock";

/// Agent definition plus decoding controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub id: String,
    pub role: AgentRole,
    #[serde(default)]
    pub system_prompt: String,
    #[serde(default = "default_model")]
    pub model_id: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_top_p")]
    pub top_p: f64,
    #[serde(default)]
    pub stop: Vec<String>,
    #[serde(default = "default_endpoint")]
    pub endpoint_ref: String,
    #[serde(default = "default_seed")]
    pub seed: Option<i64>,
}

fn default_model() -> String {
    "mock-model".to_string()
}
fn default_max_tokens() -> u32 {
    1024
}
fn default_top_p() -> f64 {
    1.0
}
fn default_endpoint() -> String {
    MOCK_ENDPOINT.to_string()
}
fn default_seed() -> Option<i64> {
    Some(0)
}

impl AgentSpec {
    /// A spec with reproducible defaults: temperature 0, seed 0, mock endpoint.
    pub fn new(id: impl Into<String>, role: AgentRole) -> Self {
        AgentSpec {
            id: id.into(),
            role,
            system_prompt: String::new(),
            model_id: default_model(),
            temperature: 0.0,
            max_tokens: default_max_tokens(),
            top_p: default_top_p(),
            stop: Vec::new(),
            endpoint_ref: default_endpoint(),
            seed: default_seed(),
        }
    }

    pub fn with_system_prompt(mut self, prompt: impl Into<String>) -> Self {
        self.system_prompt = prompt.into();
        self
    }

    pub fn is_mock(&self) -> bool {
        self.endpoint_ref == MOCK_ENDPOINT
    }

    /// Range problems with the decoding controls.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.id.is_empty() || self.id.chars().any(char::is_whitespace) {
            out.push(format!("agent id {:?} must be a non-empty token", self.id));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            out.push(format!("temperature {} must be >= 0", self.temperature));
        }
        if self.max_tokens == 0 {
            out.push("max_tokens must be positive".to_string());
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            out.push(format!("top_p {} must be in (0,1]", self.top_p));
        }
        if self.endpoint_ref.is_empty() {
            out.push("endpoint_ref must not be empty".to_string());
        }
        out
    }
}
