#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use telehub_core::agents::{AgentInvoker, AgentMode};
use telehub_core::context::ApprovalFlag;
use telehub_core::engine::{DefaultResolver, Engine, Run, RunOptions, RunStatus, SteppingClock};
use telehub_core::prebuilt;

pub const PASS_TRACE: &str = "prebuilt:ai5gtest/registration.trace";
pub const FAIL_TRACE: &str = "prebuilt:ai5gtest/registration_missing_auth.trace";

pub fn mock_engine(start_us: i64) -> Engine {
    Engine::new(
        Arc::new(AgentInvoker::new(AgentMode::Mock, prebuilt::mock_agents())),
        Arc::new(DefaultResolver::new()),
    )
    .with_clock(Arc::new(SteppingClock::new(start_us, 1000)))
}

pub fn bindings(trace: &str) -> BTreeMap<String, String> {
    let mut b = prebuilt::entry("ai5gtest").unwrap().default_bindings;
    b.insert("raw_trace".into(), trace.into());
    b
}

pub fn flag(approved: bool) -> ApprovalFlag {
    ApprovalFlag {
        approved,
        reviewer: "qa".into(),
        comment: if approved {
            String::new()
        } else {
            "steps 6 and 7 are swapped".into()
        },
        decided_at_us: 1_704_067_300_000_000,
    }
}

/// Starts the bundled graph and runs it to completion, answering the
/// approval gate with `approve`.
pub fn run_ai5gtest(engine: &Engine, trace: &str, approve: bool, run_id: &str) -> Arc<Run> {
    let run = engine
        .start_run(
            prebuilt::ai5gtest_graph(),
            &bindings(trace),
            RunOptions {
                run_id: Some(run_id.into()),
                ..Default::default()
            },
        )
        .unwrap();
    assert_eq!(engine.execute(&run), RunStatus::AwaitingApproval);
    engine.resolve_approval(&run, flag(approve)).unwrap();
    engine.execute(&run);
    run
}
