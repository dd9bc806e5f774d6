//! Engine runs of the bundled ai5gtest graph under mock agents. Expected
//! windows, verdicts and debug lines come from tests/oracles/simulate_prebuilt.py.

mod common;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde_json::{json, Value};
use telehub_core::agents::{AgentBackend, AgentError, AgentReply, AgentSpec, ChatMessage};
use telehub_core::context::{LogWindow, ProceduralFlow, Schema, TextBlob, VerdictStatus};
use telehub_core::engine::{
    export_report, normalized_log, read_event_log, ApprovalError, DefaultResolver, Engine,
    EventKind, NodeStatus, Run, RunOptions, RunState, RunStatus, StartError, SteppingClock,
    SummaryDocument, REWORK_MEDIA_TYPE,
};
use telehub_core::prebuilt;

use common::*;

fn windows(st: &RunState) -> Vec<(u64, u64)> {
    st.events_of(EventKind::ObjectPublished)
        .filter(|e| {
            e.node_id.as_deref() == Some("validation") && e.detail["schema"] == "log-window"
        })
        .map(|e| {
            let w: LogWindow = st.store[e.detail["hash"].as_str().unwrap()]
                .decode_payload()
                .unwrap();
            (w.start_index, w.end_index)
        })
        .collect()
}

fn summary(st: &RunState) -> SummaryDocument {
    let obj = st.objects_on("validation", "summary")[0];
    let blob: TextBlob = obj.decode_payload().unwrap();
    serde_json::from_str(&blob.text).unwrap()
}

fn invocations<'a>(
    st: &'a RunState,
    role: &'a str,
) -> impl Iterator<Item = &'a telehub_core::engine::RunEvent> {
    st.events_of(EventKind::AgentInvoked)
        .filter(move |e| e.detail["role"] == role)
}

#[test]
fn run_is_send_and_sync() {
    fn check<T: Send + Sync>() {}
    check::<Run>();
    check::<Engine>();
}

#[test]
fn passing_trace() {
    let engine = mock_engine(1_000_000);
    let run = run_ai5gtest(&engine, PASS_TRACE, true, "pass-1");
    let st = run.snapshot();
    assert_eq!(st.status, RunStatus::Succeeded, "{:?}", st.reason);
    assert_eq!(st.branches["approval"], "approve");
    assert_eq!(st.branches["verdict_branch"], "pass");
    assert_eq!(st.node_status["debug_llm"], NodeStatus::Skipped);
    assert_eq!(st.node_status["rework_sink"], NodeStatus::Skipped);
    assert_eq!(st.node_status["report"], NodeStatus::Done);

    // oracle: 15 merged records, window starts 0x6, 4x4, 8x2
    let starts: Vec<u64> = windows(&st).iter().map(|w| w.0).collect();
    assert_eq!(starts, [0, 0, 0, 0, 0, 0, 4, 4, 4, 4, 8, 8]);
    assert_eq!(invocations(&st, "val").count(), 12);
    assert_eq!(invocations(&st, "gen").count(), 1);
    assert_eq!(invocations(&st, "debug").count(), 0);

    let doc = summary(&st);
    assert_eq!(doc.summary.aggregate.as_str(), "pass");
    assert_eq!(doc.summary.windows_examined, 12);
    let spans: Vec<(u64, u64)> = doc
        .summary
        .per_step
        .iter()
        .map(|v| (v.window_start, v.window_end))
        .collect();
    assert_eq!(
        spans,
        [
            (0, 8),
            (0, 8),
            (0, 8),
            (0, 8),
            (0, 8),
            (4, 12),
            (4, 12),
            (4, 12),
            (8, 15),
            (8, 15)
        ]
    );
    let hits: Vec<&str> = doc
        .summary
        .per_step
        .iter()
        .map(|v| v.explanation.as_str())
        .collect();
    assert_eq!(hits[5], "matched at index 8");
    assert_eq!(hits[9], "matched at index 14");
    assert!(doc.failures.is_empty());

    // the pass branch hands the summary straight to the report
    let collected = st
        .events_of(EventKind::NodeFinished)
        .find(|e| e.node_id.as_deref() == Some("report"))
        .unwrap()
        .detail["collected"]
        .clone();
    assert_eq!(collected, json!(st.on_port("validation", "summary")));
}

#[test]
fn missing_step_takes_fail_branch() {
    let engine = mock_engine(1_000_000);
    let run = run_ai5gtest(&engine, FAIL_TRACE, true, "fail-1");
    let st = run.snapshot();
    // the run itself succeeds; the verdict is carried by the branch
    assert_eq!(st.status, RunStatus::Succeeded, "{:?}", st.reason);
    assert_eq!(st.branches["verdict_branch"], "fail");
    assert_eq!(st.node_status["debug_llm"], NodeStatus::Done);

    let starts: Vec<u64> = windows(&st).iter().map(|w| w.0).collect();
    assert_eq!(starts, [0, 0, 0, 0, 0, 0, 4, 8, 8, 8, 8]);
    let doc = summary(&st);
    assert_eq!(doc.summary.aggregate.as_str(), "fail");
    let six = &doc.summary.per_step[5];
    assert_eq!(six.status, VerdictStatus::NotFound);
    assert_eq!(six.explanation, "window exhausted");
    assert_eq!((six.window_start, six.window_end), (0, 12));
    assert_eq!(doc.failures.len(), 1);
    assert_eq!(doc.failures[0].window.records.len(), 12);
    assert!(doc
        .summary
        .per_step
        .iter()
        .filter(|v| v.step_no != 6)
        .all(|v| v.status == VerdictStatus::Found));

    let debug: Vec<_> = invocations(&st, "debug").collect();
    assert_eq!(debug.len(), 1);
    assert_eq!(
        debug[0].detail["reply"],
        "Step 6 NAS AuthenticationResponse UL not found in window [0,12): \
         nearest record name AuthenticationRequest (edit distance 5)."
    );
    let reply = st.objects_on("debug_llm", "reply")[0];
    assert_eq!(
        reply.provenance().parent_hashes,
        st.on_port("verdict_branch", "fail")
    );
}

#[test]
fn rejection_routes_to_rework() {
    let engine = mock_engine(1_000_000);
    let run = run_ai5gtest(&engine, PASS_TRACE, false, "reject-1");
    let st = run.snapshot();
    assert_eq!(st.status, RunStatus::Succeeded);
    assert_eq!(st.branches["approval"], "reject");
    assert_eq!(st.node_status["rework_sink"], NodeStatus::Done);
    for skipped in ["validation", "verdict_branch", "debug_llm", "report"] {
        assert_eq!(st.node_status[skipped], NodeStatus::Skipped, "{skipped}");
    }
    assert_eq!(invocations(&st, "val").count(), 0);
    let rework = st.objects_on("approval", "reject")[0];
    let blob: TextBlob = rework.decode_payload().unwrap();
    assert_eq!(blob.media_type.as_deref(), Some(REWORK_MEDIA_TYPE));
    let body: Value = serde_json::from_str(&blob.text).unwrap();
    assert_eq!(body["comment"], "steps 6 and 7 are swapped");
    assert_eq!(body["rejected"], json!(st.on_port("gen_llm", "reply")));
}

#[test]
fn approval_gate_exposes_generated_flow() {
    let engine = mock_engine(0);
    let run = engine
        .start_run(
            prebuilt::ai5gtest_graph(),
            &bindings(PASS_TRACE),
            RunOptions::default(),
        )
        .unwrap();
    assert_eq!(engine.execute(&run), RunStatus::AwaitingApproval);
    let st = run.snapshot();
    let pending = st.pending_approval.clone().unwrap();
    assert_eq!(pending.node_id, "approval");
    assert_eq!(pending.exposed, st.on_port("gen_llm", "reply"));
    let flow: ProceduralFlow = st.store[&pending.exposed[0]].decode_payload().unwrap();
    assert_eq!(flow, prebuilt::flows("ai5gtest").unwrap()[0]);
    // nothing downstream of the gate has run
    assert_eq!(st.node_status["validation"], NodeStatus::Idle);
    // executing again while paused is a no-op
    let n = st.event_count();
    assert_eq!(engine.execute(&run), RunStatus::AwaitingApproval);
    assert_eq!(run.snapshot().event_count(), n);
}

#[test]
fn approval_in_wrong_state() {
    let engine = mock_engine(0);
    let run = run_ai5gtest(&engine, PASS_TRACE, true, "done");
    assert_eq!(
        engine.resolve_approval(&run, flag(true)),
        Err(ApprovalError::WrongState(RunStatus::Succeeded))
    );
    let mut bad = flag(true);
    bad.reviewer.clear();
    assert!(matches!(
        engine.resolve_approval(&run, bad),
        Err(ApprovalError::InvalidFlag(_))
    ));
}

#[test]
fn normalized_logs_are_run_independent() {
    let a = run_ai5gtest(&mock_engine(5), FAIL_TRACE, true, "run-a");
    let b = run_ai5gtest(&mock_engine(9_999_999), FAIL_TRACE, true, "run-b");
    let (la, lb) = (a.snapshot().events, b.snapshot().events);
    assert_eq!(normalized_log(&la), normalized_log(&lb));
    // raw logs differ in time and id
    assert_ne!(la, lb);
}

/// Regression pins for the normalized logs. Set UPDATE_GOLDEN=1 to rewrite.
#[test]
fn golden_normalized_logs() {
    for (name, trace) in [("ai5gtest_pass", PASS_TRACE), ("ai5gtest_fail", FAIL_TRACE)] {
        let run = run_ai5gtest(&mock_engine(0), trace, true, name);
        let log = normalized_log(&run.snapshot().events);
        let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
            .join(format!("tests/golden/{name}.jsonl"));
        if std::env::var_os("UPDATE_GOLDEN").is_some() {
            std::fs::create_dir_all(path.parent().unwrap()).unwrap();
            std::fs::write(&path, &log).unwrap();
        }
        let golden = std::fs::read_to_string(&path).unwrap();
        assert!(golden == log, "{name} drifted from {}", path.display());
    }
}

#[test]
fn published_hashes_are_deterministic() {
    let hashes = |run: Arc<Run>| -> Vec<String> {
        run.snapshot()
            .events_of(EventKind::ObjectPublished)
            .filter(|e| e.detail["schema"] != Schema::ApprovalFlag.as_str())
            .map(|e| e.detail["hash"].as_str().unwrap().to_string())
            .collect()
    };
    let a = hashes(run_ai5gtest(&mock_engine(1), PASS_TRACE, true, "x"));
    let b = hashes(run_ai5gtest(&mock_engine(777), PASS_TRACE, true, "y"));
    assert_eq!(a, b);
}

#[test]
fn event_sequence_is_dense() {
    let run = run_ai5gtest(&mock_engine(0), PASS_TRACE, true, "seq");
    let st = run.snapshot();
    for (i, e) in st.events.iter().enumerate() {
        assert_eq!(e.seq, i as u64 + 1);
    }
    assert_eq!(st.events.first().unwrap().kind, EventKind::RunStarted);
    assert_eq!(st.events.last().unwrap().kind, EventKind::RunFinished);
    let tail = run.events_since(st.event_count() as u64 - 2, 10);
    assert_eq!(tail.len(), 2);
    assert_eq!(tail[0].seq, st.event_count() as u64 - 1);
}

#[test]
fn persisted_log_replays_to_same_state() {
    let dir = tempfile::tempdir().unwrap();
    let engine = mock_engine(0).with_runs_dir(dir.path());
    let run = run_ai5gtest(&engine, FAIL_TRACE, true, "persist");
    let live = run.snapshot();
    let events = read_event_log(&dir.path().join("persist.jsonl")).unwrap();
    assert_eq!(events, live.events);

    let restored = mock_engine(0).with_runs_dir(dir.path());
    assert_eq!(restored.restore_runs().unwrap(), 1);
    let again = restored.run("persist").unwrap().snapshot();
    assert_eq!(again.status, live.status);
    assert_eq!(again.node_status, live.node_status);
    assert_eq!(again.ports, live.ports);
    assert_eq!(again.branches, live.branches);
    assert_eq!(again.store, live.store);
    assert_eq!(
        export_report(&again).unwrap(),
        export_report(&live).unwrap()
    );
}

#[test]
fn paused_run_resumes_after_restore() {
    let dir = tempfile::tempdir().unwrap();
    let engine = mock_engine(0).with_runs_dir(dir.path());
    let run = engine
        .start_run(
            prebuilt::ai5gtest_graph(),
            &bindings(PASS_TRACE),
            RunOptions {
                run_id: Some("paused".into()),
                ..Default::default()
            },
        )
        .unwrap();
    engine.execute(&run);
    drop(engine);

    let engine = mock_engine(0).with_runs_dir(dir.path());
    engine.restore_runs().unwrap();
    let run = engine.run("paused").unwrap();
    assert_eq!(run.status(), RunStatus::AwaitingApproval);
    engine.resolve_approval(&run, flag(true)).unwrap();
    assert_eq!(engine.execute(&run), RunStatus::Succeeded);
    assert_eq!(run.snapshot().branches["verdict_branch"], "pass");
    // the appended log still replays
    let events = read_event_log(&dir.path().join("paused.jsonl")).unwrap();
    assert_eq!(events, run.snapshot().events);
}

#[test]
fn approval_deadline_cancels() {
    let engine = mock_engine(0);
    let run = engine
        .start_run(
            prebuilt::ai5gtest_graph(),
            &bindings(PASS_TRACE),
            RunOptions {
                run_id: None,
                approval_deadline_ms: Some(5),
                ..Default::default()
            },
        )
        .unwrap();
    engine.execute(&run);
    // the stepping clock advances 1 ms per reading
    let mut outcome = None;
    for _ in 0..10 {
        outcome = engine.check_deadline(&run);
        if outcome.is_some() {
            break;
        }
    }
    assert_eq!(outcome, Some(RunStatus::Cancelled));
    assert_eq!(
        run.snapshot().reason.as_deref(),
        Some("approval deadline passed")
    );
}

#[test]
fn cancel_terminal_run_is_rejected() {
    let engine = mock_engine(0);
    let run = run_ai5gtest(&engine, PASS_TRACE, true, "c");
    assert!(engine.cancel(&run, "late").is_err());
}

#[test]
fn start_errors() {
    let engine = mock_engine(0);
    let g = prebuilt::ai5gtest_graph();
    let mut b = bindings(PASS_TRACE);
    b.remove("ran_log");
    assert_eq!(
        engine
            .start_run(g.clone(), &b, RunOptions::default())
            .unwrap_err(),
        StartError::UnboundInput("ran_log".into())
    );
    let mut b = bindings(PASS_TRACE);
    b.insert("report".into(), "x".into());
    assert_eq!(
        engine
            .start_run(g.clone(), &b, RunOptions::default())
            .unwrap_err(),
        StartError::UnknownBinding("report".into())
    );
    let b = bindings("prebuilt:ai5gtest/absent.trace");
    assert!(matches!(
        engine.start_run(g.clone(), &b, RunOptions::default()),
        Err(StartError::ArtifactMissing { .. })
    ));
    let mut broken = g;
    broken.edges.pop();
    broken.edges.push(telehub_core::graph::Edge::new(
        "report.sink",
        "ran_log.artifact",
    ));
    assert!(matches!(
        engine.start_run(broken, &bindings(PASS_TRACE), RunOptions::default()),
        Err(StartError::InvalidGraph(_))
    ));
}

/// Fails every call from one agent id, answers the rest with the mocks.
struct Failing {
    inner: telehub_core::agents::AgentInvoker,
    broken: &'static str,
}

impl AgentBackend for Failing {
    fn complete(
        &self,
        spec: &AgentSpec,
        messages: &[ChatMessage],
    ) -> Result<AgentReply, AgentError> {
        if spec.id == self.broken {
            Err(AgentError::Timeout(10))
        } else {
            self.inner.complete(spec, messages)
        }
    }
}

fn failing_engine(broken: &'static str) -> Engine {
    Engine::new(
        Arc::new(Failing {
            inner: telehub_core::agents::AgentInvoker::new(
                Default::default(),
                prebuilt::mock_agents(),
            ),
            broken,
        }),
        Arc::new(DefaultResolver::new()),
    )
    .with_clock(Arc::new(SteppingClock::new(0, 1)))
}

#[test]
fn agent_failure_is_node_error() {
    let engine = failing_engine("debug-llm");
    let run = run_ai5gtest(&engine, FAIL_TRACE, true, "debug-down");
    let st = run.snapshot();
    assert_eq!(st.status, RunStatus::Failed);
    assert_eq!(st.node_status["debug_llm"], NodeStatus::Error);
    assert_eq!(st.reason.as_deref(), Some("node_error in debug_llm"));
    let err = st.events_of(EventKind::NodeError).next().unwrap();
    assert!(
        err.detail["error"].as_str().unwrap().contains("timed out"),
        "{:?}",
        err.detail
    );
    // both of the report's feeds are inactive: pass not taken, debug errored
    assert_eq!(st.node_status["report"], NodeStatus::Skipped);
}

#[test]
fn generator_failure_stops_before_gate() {
    let engine = failing_engine("gen-llm");
    let run = engine
        .start_run(
            prebuilt::ai5gtest_graph(),
            &bindings(PASS_TRACE),
            RunOptions::default(),
        )
        .unwrap();
    assert_eq!(engine.execute(&run), RunStatus::Failed);
    let st = run.snapshot();
    assert_eq!(st.node_status["gen_llm"], NodeStatus::Error);
    assert_eq!(st.node_status["approval"], NodeStatus::Skipped);
    assert!(st.pending_approval.is_none());
}

#[test]
fn report_sections() {
    let run = run_ai5gtest(&mock_engine(0), FAIL_TRACE, true, "rep");
    let report = export_report(&run.snapshot()).unwrap();
    assert_eq!(report.json["status"], "succeeded");
    assert_eq!(report.json["validation"][0]["aggregate"], "fail");
    assert_eq!(
        report.json["validation"][0]["steps"][5]["status"],
        "not_found"
    );
    assert_eq!(report.json["debug"].as_array().unwrap().len(), 1);
    assert!(report
        .markdown
        .contains("## Validation: reg-basic (`validation`)"));
    assert!(report
        .markdown
        .contains("Aggregate: **fail**. Steps found: 9/10. Windows examined: 11."));
    assert!(report
        .markdown
        .contains("> Step 6 NAS AuthenticationResponse UL"));
    let dir = tempfile::tempdir().unwrap();
    report.write_to(dir.path()).unwrap();
    let back: Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(back, report.json);

    let engine = mock_engine(0);
    let paused = engine
        .start_run(
            prebuilt::ai5gtest_graph(),
            &bindings(PASS_TRACE),
            RunOptions::default(),
        )
        .unwrap();
    engine.execute(&paused);
    assert!(export_report(&paused.snapshot()).is_err());
}

#[test]
fn projected_trace_without_fields_is_node_error() {
    let mut g = prebuilt::ai5gtest_graph();
    for n in &mut g.nodes {
        if let telehub_core::graph::NodeConfig::Logic(l) = &mut n.config {
            if let Some(sel) = &mut l.selector {
                sel.include_paths.retain(|p| p != "direction");
            }
        }
    }
    let engine = mock_engine(0);
    let run = engine
        .start_run(g, &bindings(PASS_TRACE), RunOptions::default())
        .unwrap();
    engine.execute(&run);
    engine.resolve_approval(&run, flag(true)).unwrap();
    assert_eq!(engine.execute(&run), RunStatus::Failed);
    let st = run.snapshot();
    assert_eq!(st.node_status["validation"], NodeStatus::Error);
    let msg = st.events_of(EventKind::NodeError).next().unwrap().detail["error"].clone();
    assert!(msg.as_str().unwrap().contains("direction"), "{msg}");
}

#[test]
fn bindings_are_recorded() {
    let run = run_ai5gtest(&mock_engine(0), PASS_TRACE, true, "b");
    let started = &run.snapshot().events[0];
    let b: BTreeMap<String, String> =
        serde_json::from_value(started.detail["bindings"].clone()).unwrap();
    assert_eq!(b, bindings(PASS_TRACE));
}
