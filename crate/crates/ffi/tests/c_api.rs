use std::ffi::{c_char, CStr, CString};
use std::ptr;

use serde_json::Value;
use telehub_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn take(p: *mut c_char) -> String {
    assert!(!p.is_null());
    let s = CStr::from_ptr(p).to_str().unwrap().to_string();
    telehub_string_free(p);
    s
}

fn last_error() -> String {
    let p = telehub_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

const RECORD: &str =
    r#"{"protocol":"RRC","name":"RRCSetupRequest","timestamp_us":1000,"direction":"UL","index":0}"#;

#[test]
fn object_round_trip() {
    unsafe {
        let mut obj = ptr::null_mut();
        let st = telehub_object_new(
            c("message-record").as_ptr(),
            c(RECORD).as_ptr(),
            c("n").as_ptr(),
            c("r").as_ptr(),
            0,
            &mut obj,
        );
        assert_eq!(st, TelehubStatus::Ok);
        assert!(telehub_last_error().is_null());

        let mut out = ptr::null_mut();
        assert_eq!(telehub_object_hash(obj, &mut out), TelehubStatus::Ok);
        assert_eq!(
            take(out),
            "cfa30a708c08d3f2f52b428e05c5ba88e8a17f8f96001a063b7dbb80974c63a7"
        );

        assert_eq!(telehub_object_canonical(obj, &mut out), TelehubStatus::Ok);
        let canonical = take(out);
        let mut back = ptr::null_mut();
        assert_eq!(
            telehub_object_decode(canonical.as_ptr(), canonical.len(), &mut back),
            TelehubStatus::Ok
        );
        assert_eq!(telehub_object_canonical(back, &mut out), TelehubStatus::Ok);
        assert_eq!(take(out), canonical);

        let mut proj = ptr::null_mut();
        assert_eq!(
            telehub_object_project(obj, c(r#"["name"]"#).as_ptr(), &mut proj),
            TelehubStatus::Ok
        );
        assert_eq!(telehub_object_canonical(proj, &mut out), TelehubStatus::Ok);
        let doc: Value = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(
            doc["payload"],
            serde_json::json!({"name": "RRCSetupRequest"})
        );
        assert_eq!(
            doc["provenance"]["parent_hashes"][0],
            "cfa30a708c08d3f2f52b428e05c5ba88e8a17f8f96001a063b7dbb80974c63a7"
        );

        assert_eq!(
            telehub_object_project(obj, c(r#"["nope"]"#).as_ptr(), &mut proj),
            TelehubStatus::PayloadInvalid
        );
        telehub_object_free(proj);
        telehub_object_free(back);
        telehub_object_free(obj);
        telehub_object_free(ptr::null_mut());
    }
}

#[test]
fn object_errors() {
    unsafe {
        let mut obj = ptr::null_mut();
        let st = telehub_object_new(
            c("kpi-thing").as_ptr(),
            c("{}").as_ptr(),
            c("n").as_ptr(),
            c("r").as_ptr(),
            0,
            &mut obj,
        );
        assert_eq!(st, TelehubStatus::UnknownSchema);
        assert!(last_error().contains("kpi-thing"));
        assert!(obj.is_null());

        let st = telehub_object_new(
            c("message-record").as_ptr(),
            c(r#"{"protocol":"RRC"}"#).as_ptr(),
            c("n").as_ptr(),
            c("r").as_ptr(),
            0,
            &mut obj,
        );
        assert_eq!(st, TelehubStatus::PayloadInvalid);
        assert!(
            last_error().contains("missing field name"),
            "{}",
            last_error()
        );

        let st = telehub_object_new(
            ptr::null(),
            c("{}").as_ptr(),
            c("n").as_ptr(),
            c("r").as_ptr(),
            0,
            &mut obj,
        );
        assert_eq!(st, TelehubStatus::NullArgument);
        let st = telehub_object_new(
            c("text-blob").as_ptr(),
            c("{not json").as_ptr(),
            c("n").as_ptr(),
            c("r").as_ptr(),
            0,
            &mut obj,
        );
        assert_eq!(st, TelehubStatus::InvalidJson);
        let st = telehub_object_new(
            c("text-blob").as_ptr(),
            c(r#"{"text":"x"}"#).as_ptr(),
            c("n").as_ptr(),
            c("r").as_ptr(),
            0,
            ptr::null_mut(),
        );
        assert_eq!(st, TelehubStatus::NullArgument);
        let bad = [0xffu8, 0xfe, 0];
        let st = telehub_object_new(
            bad.as_ptr().cast(),
            c("{}").as_ptr(),
            c("n").as_ptr(),
            c("r").as_ptr(),
            0,
            &mut obj,
        );
        assert_eq!(st, TelehubStatus::InvalidUtf8);
    }
}

#[test]
fn payload_validation_report() {
    unsafe {
        let mut out = ptr::null_mut();
        let st = telehub_validate_payload(
            c("validation-verdict").as_ptr(),
            c(r#"{"status":"found","explanation":"","confidence":1.5,"step_no":1,"window_start":0,"window_end":1}"#)
                .as_ptr(),
            &mut out,
        );
        assert_eq!(st, TelehubStatus::Ok);
        let v: Value = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 1);
        assert_eq!(v[0]["path"], "confidence");
        assert_eq!(
            telehub_validate_payload(
                c("text-blob").as_ptr(),
                c(r#"{"text":""}"#).as_ptr(),
                &mut out
            ),
            TelehubStatus::Ok
        );
        assert_eq!(take(out), "[]");
    }
}

#[test]
fn graph_functions() {
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(
            telehub_prebuilt_graph(c("ai5gtest").as_ptr(), &mut out),
            TelehubStatus::Ok
        );
        let graph = take(out);
        assert_eq!(
            telehub_graph_validate(c(&graph).as_ptr(), &mut out),
            TelehubStatus::Ok
        );
        assert_eq!(take(out), "[]");
        assert_eq!(
            telehub_graph_topo_order(c(&graph).as_ptr(), &mut out),
            TelehubStatus::Ok
        );
        let order: Vec<String> = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(order.first().map(String::as_str), Some("ran_log"));
        assert_eq!(order.last().map(String::as_str), Some("report"));

        let cycle = std::fs::read_to_string(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../core/tests/fixtures/graphs/cycle.json"
        ))
        .unwrap();
        assert_eq!(
            telehub_graph_validate(c(&cycle).as_ptr(), &mut out),
            TelehubStatus::Ok
        );
        let d: Value = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(d[0]["code"], "CycleDetected");
        assert_eq!(
            telehub_graph_topo_order(c(&cycle).as_ptr(), &mut out),
            TelehubStatus::InvalidGraph
        );
        assert_eq!(
            telehub_graph_validate(c(r#"{"nodes": 3}"#).as_ptr(), &mut out),
            TelehubStatus::InvalidGraph
        );
        assert_eq!(
            telehub_prebuilt_graph(c("nope").as_ptr(), &mut out),
            TelehubStatus::NotFound
        );
    }
}

#[test]
fn ingest_functions() {
    unsafe {
        let pcap = std::fs::read(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../core/tests/fixtures/pcap/tiny_usec_be.pcap"
        ))
        .unwrap();
        let mut out = ptr::null_mut();
        assert_eq!(
            telehub_pcap_to_trace(pcap.as_ptr(), pcap.len(), &mut out),
            TelehubStatus::Ok
        );
        assert_eq!(take(out).lines().count(), 3);
        assert_eq!(
            telehub_pcap_to_trace(pcap.as_ptr(), pcap.len() - 5, &mut out),
            TelehubStatus::ParseError
        );
        assert!(last_error().starts_with("TruncatedRecord(2)"));
        assert_eq!(
            telehub_pcap_to_trace(ptr::null(), 4, &mut out),
            TelehubStatus::NullArgument
        );

        let log = "2024-01-01T00:00:00.001000 [RRC    ] [I] Rx RRCSetupRequest\n\
                   2024-01-01T00:00:00.002000 [RRC    ] [I] Tx RRCSetup\n";
        assert_eq!(
            telehub_srsran_to_trace(c(log).as_ptr(), false, &mut out),
            TelehubStatus::Ok
        );
        let text = take(out);
        assert_eq!(text.lines().count(), 2, "{text}");
        assert!(text.contains(r#""direction":"UL""#));
    }
}

unsafe fn run_ai5gtest(bindings: &str, approve: bool) -> (TelehubRunStatus, Value) {
    let mut engine = ptr::null_mut();
    assert_eq!(
        telehub_engine_new_mock(ptr::null(), &mut engine),
        TelehubStatus::Ok
    );
    let mut out = ptr::null_mut();
    assert_eq!(
        telehub_prebuilt_graph(c("ai5gtest").as_ptr(), &mut out),
        TelehubStatus::Ok
    );
    let graph = take(out);
    let mut run = ptr::null_mut();
    assert_eq!(
        telehub_run_start(engine, c(&graph).as_ptr(), c(bindings).as_ptr(), &mut run),
        TelehubStatus::Ok,
        "{}",
        last_error()
    );
    let mut st = TelehubRunStatus::Pending;
    assert_eq!(telehub_run_execute(engine, run, &mut st), TelehubStatus::Ok);
    assert_eq!(st, TelehubRunStatus::AwaitingApproval);
    assert_eq!(
        telehub_run_report(run, false, &mut out),
        TelehubStatus::WrongState
    );
    assert_eq!(
        telehub_run_approve(engine, run, approve, c("qa").as_ptr(), ptr::null(), &mut st),
        TelehubStatus::Ok
    );
    assert_eq!(telehub_run_status(run), st);
    assert_eq!(
        telehub_run_approve(engine, run, true, c("qa").as_ptr(), ptr::null(), &mut st),
        TelehubStatus::WrongState
    );
    assert_eq!(telehub_run_events(run, 0, &mut out), TelehubStatus::Ok);
    let events: Value = serde_json::from_str(&take(out)).unwrap();
    assert_eq!(events[0]["seq"], 1);
    assert_eq!(telehub_run_report(run, false, &mut out), TelehubStatus::Ok);
    let report: Value = serde_json::from_str(&take(out)).unwrap();
    assert_eq!(telehub_run_report(run, true, &mut out), TelehubStatus::Ok);
    assert!(take(out).starts_with("# Run report: ai5gtest"));
    telehub_run_free(run);
    telehub_engine_free(engine);
    (st, report)
}

const PASS: &str = r#"{"test_intent":"prebuilt:ai5gtest/intent.txt","raw_trace":"prebuilt:ai5gtest/registration.trace","ran_log":"prebuilt:ai5gtest/gnb.log"}"#;
const FAIL: &str = r#"{"test_intent":"prebuilt:ai5gtest/intent.txt","raw_trace":"prebuilt:ai5gtest/registration_missing_auth.trace","ran_log":"prebuilt:ai5gtest/gnb.log"}"#;

#[test]
fn run_lifecycle() {
    unsafe {
        let (st, report) = run_ai5gtest(PASS, true);
        assert_eq!(st, TelehubRunStatus::Succeeded);
        assert_eq!(report["validation"][0]["aggregate"], "pass");

        let (st, report) = run_ai5gtest(FAIL, true);
        assert_eq!(st, TelehubRunStatus::Succeeded);
        assert_eq!(report["validation"][0]["aggregate"], "fail");
        assert_eq!(report["debug"].as_array().unwrap().len(), 1);

        let (_, report) = run_ai5gtest(PASS, false);
        assert_eq!(report["rework"].as_array().unwrap().len(), 1);
    }
}

#[test]
fn run_start_errors() {
    unsafe {
        let mut engine = ptr::null_mut();
        assert_eq!(
            telehub_engine_new_mock(ptr::null(), &mut engine),
            TelehubStatus::Ok
        );
        let mut out = ptr::null_mut();
        telehub_prebuilt_graph(c("ai5gtest").as_ptr(), &mut out);
        let graph = take(out);
        let mut run = ptr::null_mut();
        assert_eq!(
            telehub_run_start(engine, c(&graph).as_ptr(), ptr::null(), &mut run),
            TelehubStatus::UnboundInput
        );
        assert!(last_error().ends_with("is not bound"), "{}", last_error());
        assert_eq!(
            telehub_run_start(engine, c(&graph).as_ptr(), c("[1]").as_ptr(), &mut run),
            TelehubStatus::InvalidJson
        );
        let cycle = std::fs::read_to_string(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../core/tests/fixtures/graphs/cycle.json"
        ))
        .unwrap();
        assert_eq!(
            telehub_run_start(
                engine,
                c(&cycle).as_ptr(),
                c(r#"{"src":"x"}"#).as_ptr(),
                &mut run
            ),
            TelehubStatus::InvalidGraph
        );
        assert_eq!(telehub_run_status(ptr::null()), TelehubRunStatus::Failed);
        telehub_engine_free(engine);
    }
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(telehub_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
