use std::collections::BTreeMap;

use regex::{Captures, Regex};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::sync::LazyLock;

use super::spec::AgentSpec;
use crate::context::{to_canonical_string, ContextObject};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatRole {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: ChatRole,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: ChatRole::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: ChatRole::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: ChatRole::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("unbound placeholder {0}")]
    UnboundPlaceholder(String),
}

/// Named values a template can address. Objects bind their payload;
/// several objects under one name bind a list of payloads.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PromptBindings {
    values: BTreeMap<String, Value>,
}

impl PromptBindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind_value(&mut self, name: impl Into<String>, value: Value) -> &mut Self {
        self.values.insert(name.into(), value);
        self
    }

    pub fn bind_object(&mut self, name: impl Into<String>, object: &ContextObject) -> &mut Self {
        self.bind_value(name, object.payload().clone())
    }

    /// One object binds its payload, several bind a list.
    pub fn bind_objects(
        &mut self,
        name: impl Into<String>,
        objects: &[ContextObject],
    ) -> &mut Self {
        let value = match objects {
            [one] => one.payload().clone(),
            many => Value::Array(many.iter().map(|o| o.payload().clone()).collect()),
        };
        self.bind_value(name, value)
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.values.get(name)
    }
}

static PLACEHOLDER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\{\{\s*([A-Za-z0-9_-]+)((?:\.[A-Za-z0-9_]+)*)\s*\}\}").expect("placeholder regex")
});

/// Addresses `path` inside `value`; lists map element-wise.
fn address(value: &Value, path: &[&str]) -> Option<Value> {
    match path.split_first() {
        None => Some(value.clone()),
        Some((head, rest)) => match value {
            Value::Object(m) => address(m.get(*head)?, rest),
            Value::Array(items) => items
                .iter()
                .map(|v| address(v, path))
                .collect::<Option<Vec<_>>>()
                .map(Value::Array),
            _ => None,
        },
    }
}

fn render_value(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => to_canonical_string(other),
    }
}

/// Substitutes `{{name.path}}` placeholders. Strings are inserted verbatim,
/// anything else as canonical JSON text.
pub fn render_template(template: &str, bindings: &PromptBindings) -> Result<String, PromptError> {
    let mut missing = None;
    let rendered = PLACEHOLDER.replace_all(template, |caps: &Captures| {
        let name = &caps[1];
        let path: Vec<&str> = caps[2].split('.').filter(|s| !s.is_empty()).collect();
        match bindings.get(name).and_then(|v| address(v, &path)) {
            Some(v) => render_value(&v),
            None => {
                missing.get_or_insert_with(|| format!("{name}{}", &caps[2]));
                String::new()
            }
        }
    });
    match missing {
        Some(m) => Err(PromptError::UnboundPlaceholder(m)),
        None => Ok(rendered.into_owned()),
    }
}

/// System message from the agent spec (when non-empty), then the rendered
/// template as the user message.
pub fn render_prompt(
    spec: &AgentSpec,
    template: &str,
    bindings: &PromptBindings,
) -> Result<Vec<ChatMessage>, PromptError> {
    let user = render_template(template, bindings)?;
    let mut messages = Vec::with_capacity(2);
    if !spec.system_prompt.is_empty() {
        messages.push(ChatMessage::system(spec.system_prompt.clone()));
    }
    messages.push(ChatMessage::user(user));
    Ok(messages)
}
