//! Sliding-window validation of a procedural flow against a message trace.

use serde::{Deserialize, Serialize};

use crate::agents::{AgentError, ParsedVerdict, VerdictError};
use crate::context::{
    ExpectedStep, LogWindow, MessageRecord, ProceduralFlow, ValidationVerdict, VerdictStatus,
};
use crate::graph::ValidationParams;
use crate::ingest::make_window;

/// media_type of the summary text-blob published by the validation node.
pub const SUMMARY_MEDIA_TYPE: &str = "application/x-validation-summary+json";

pub const EXHAUSTED: &str = "window exhausted";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregate {
    Pass,
    Fail,
    Partial,
}

impl Aggregate {
    pub fn as_str(self) -> &'static str {
        match self {
            Aggregate::Pass => "pass",
            Aggregate::Fail => "fail",
            Aggregate::Partial => "partial",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationSummary {
    pub per_step: Vec<ValidationVerdict>,
    pub aggregate: Aggregate,
    pub windows_examined: u64,
}

/// A step that was never found and the span of records examined for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFailure {
    pub step: ExpectedStep,
    pub window: LogWindow,
}

/// What the validation node publishes as its summary text: the summary,
/// the flow it checked, and the failed steps with their windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryDocument {
    #[serde(flatten)]
    pub summary: ValidationSummary,
    pub flow: ProceduralFlow,
    pub failures: Vec<StepFailure>,
}

/// Result of asking the validator about one window.
#[derive(Debug, Clone, PartialEq)]
pub enum WindowOutcome {
    Verdict(ParsedVerdict),
    /// The reply could not be read as a verdict; counts as a failed attempt.
    Unparsed(VerdictError),
}

/// Called once per window attempt.
pub trait WindowValidator {
    fn check(
        &mut self,
        step: &ExpectedStep,
        window: &LogWindow,
    ) -> Result<WindowOutcome, AgentError>;

    /// Polled between attempts; `true` stops the loop.
    fn cancelled(&self) -> bool {
        false
    }
}

impl<F> WindowValidator for F
where
    F: FnMut(&ExpectedStep, &LogWindow) -> Result<WindowOutcome, AgentError>,
{
    fn check(
        &mut self,
        step: &ExpectedStep,
        window: &LogWindow,
    ) -> Result<WindowOutcome, AgentError> {
        self(step, window)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopResult {
    pub summary: ValidationSummary,
    pub failures: Vec<StepFailure>,
    /// Start index of every window examined, in order.
    pub window_starts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LoopError {
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("cancelled")]
    Cancelled,
}

pub fn aggregate(per_step: &[ValidationVerdict], threshold: f64) -> Aggregate {
    if per_step.iter().any(|v| v.status == VerdictStatus::NotFound) {
        Aggregate::Fail
    } else if per_step.iter().any(|v| v.confidence < threshold) {
        Aggregate::Partial
    } else {
        Aggregate::Pass
    }
}

/// Walks the flow over `records` (indexed 0..N-1). The window start never
/// moves back: a found step keeps it, a miss advances it by the stride.
pub fn exec_validation_loop(
    flow: &ProceduralFlow,
    records: &[MessageRecord],
    params: &ValidationParams,
    source_id: &str,
    validator: &mut dyn WindowValidator,
) -> Result<LoopResult, LoopError> {
    let n = records.len();
    let mut w = 0usize;
    let mut per_step = Vec::with_capacity(flow.steps.len());
    let mut failures = Vec::new();
    let mut window_starts = Vec::new();

    for step in &flow.steps {
        let mut attempts = 0usize;
        let first_start = w.min(n);
        let mut last_end: usize;
        let mut last_confidence: f64;
        let verdict = loop {
            if validator.cancelled() {
                return Err(LoopError::Cancelled);
            }
            let start = w.min(n);
            let window = make_window(source_id, records, params.window_size, start)
                .expect("start is clamped and window_size >= 1");
            window_starts.push(window.start_index);
            last_end = window.end_index as usize;
            attempts += 1;
            match validator.check(step, &window)? {
                WindowOutcome::Verdict(p) if p.verdict.status == VerdictStatus::Found => {
                    break p.verdict
                }
                WindowOutcome::Verdict(p) => last_confidence = p.verdict.confidence,
                WindowOutcome::Unparsed(_) => last_confidence = 0.0,
            }
            w = w.saturating_add(params.stride);
            let capped = params.max_windows_per_step.is_some_and(|m| attempts >= m);
            if w >= n || capped {
                let window = LogWindow {
                    source_id: source_id.to_string(),
                    start_index: first_start as u64,
                    end_index: last_end as u64,
                    records: records[first_start..last_end].to_vec(),
                };
                failures.push(StepFailure {
                    step: step.clone(),
                    window,
                });
                break ValidationVerdict {
                    status: VerdictStatus::NotFound,
                    explanation: EXHAUSTED.to_string(),
                    confidence: last_confidence,
                    step_no: step.step_no,
                    window_start: first_start as u64,
                    window_end: last_end as u64,
                };
            }
        };
        per_step.push(verdict);
    }

    let aggregate = aggregate(&per_step, params.confidence_threshold);
    Ok(LoopResult {
        summary: ValidationSummary {
            per_step,
            aggregate,
            windows_examined: window_starts.len() as u64,
        },
        failures,
        window_starts,
    })
}
