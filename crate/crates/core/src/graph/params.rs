//! Typed views over logic-node parameter maps.

use std::collections::BTreeMap;

use serde_json::Value;

pub const DEFAULT_WINDOW_SIZE: usize = 20;
pub const DEFAULT_STRIDE: usize = 10;
pub const DEFAULT_CONFIDENCE_THRESHOLD: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationParams {
    pub window_size: usize,
    pub stride: usize,
    /// `None` means keep sliding until the trace is exhausted.
    pub max_windows_per_step: Option<usize>,
    pub confidence_threshold: f64,
}

impl Default for ValidationParams {
    fn default() -> Self {
        ValidationParams {
            window_size: DEFAULT_WINDOW_SIZE,
            stride: DEFAULT_STRIDE,
            max_windows_per_step: None,
            confidence_threshold: DEFAULT_CONFIDENCE_THRESHOLD,
        }
    }
}

impl ValidationParams {
    pub fn from_params(params: &BTreeMap<String, Value>) -> Result<Self, Vec<String>> {
        let mut out = ValidationParams::default();
        let mut problems = Vec::new();
        for (key, v) in params {
            match key.as_str() {
                "window_size" => match positive(v) {
                    Some(n) => out.window_size = n,
                    None => problems.push(format!("window_size must be an integer >= 1, got {v}")),
                },
                "stride" => match positive(v) {
                    Some(n) => out.stride = n,
                    None => problems.push(format!("stride must be an integer >= 1, got {v}")),
                },
                "max_windows_per_step" => match v {
                    Value::Null => out.max_windows_per_step = None,
                    Value::String(s) if s == "unbounded" => out.max_windows_per_step = None,
                    _ => match positive(v) {
                        Some(n) => out.max_windows_per_step = Some(n),
                        None => problems.push(format!(
                            "max_windows_per_step must be an integer >= 1 or \"unbounded\", got {v}"
                        )),
                    },
                },
                "confidence_threshold" => match v.as_f64() {
                    Some(t) if (0.0..=1.0).contains(&t) => out.confidence_threshold = t,
                    _ => problems.push(format!("confidence_threshold must be in [0,1], got {v}")),
                },
                other => problems.push(format!("unknown parameter {other:?}")),
            }
        }
        if problems.is_empty() {
            Ok(out)
        } else {
            Err(problems)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetrievalParams {
    pub top_k: usize,
}

impl RetrievalParams {
    pub fn from_params(params: &BTreeMap<String, Value>) -> Result<Self, Vec<String>> {
        let mut problems = Vec::new();
        let mut top_k = None;
        for (key, v) in params {
            match key.as_str() {
                "top_k" => match positive(v) {
                    Some(n) => top_k = Some(n),
                    None => problems.push(format!("top_k must be an integer >= 1, got {v}")),
                },
                other => problems.push(format!("unknown parameter {other:?}")),
            }
        }
        match (top_k, problems.is_empty()) {
            (Some(top_k), true) => Ok(RetrievalParams { top_k }),
            (None, true) => Err(vec!["missing required parameter top_k".to_string()]),
            _ => Err(problems),
        }
    }
}

fn positive(v: &Value) -> Option<usize> {
    v.as_u64().filter(|n| *n >= 1).map(|n| n as usize)
}
