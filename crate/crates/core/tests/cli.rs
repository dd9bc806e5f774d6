//! Exit-code and output contract of the `telehub` binary.

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_telehub"));
    c.env_remove("TELEHUB_TOKEN").env_remove("TELEHUB_CONFIG");
    c
}

fn telehub(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn fixture(rel: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(rel)
        .to_string_lossy()
        .into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_exit_codes() {
    let o = telehub(&["validate", &fixture("graphs/minimal.json")]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "");

    let o = telehub(&["validate", &fixture("graphs/cycle.json")]);
    assert_eq!(code(&o), 2);
    assert_eq!(stdout(&o), "CycleDetected: a -> b -> a\n");

    let o = telehub(&["validate", &fixture("graphs/schema_mismatch.json")]);
    assert_eq!(code(&o), 2);
    assert!(
        stdout(&o).starts_with("SchemaIncompatible: edge log_records.objects -> validation.flow")
    );

    let o = telehub(&["validate", &fixture("graphs/duplicate_id.json")]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("DuplicateNodeId"), "{}", stderr(&o));

    let o = telehub(&["validate", "/nonexistent/graph.json"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("cannot read"));
}

#[test]
fn run_pass_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let started = Instant::now();
    let o = telehub(&[
        "run",
        "prebuilt:ai5gtest",
        "--agents",
        "mock",
        "--approve",
        "auto",
        "--report",
        s(dir.path()),
    ]);
    let elapsed = started.elapsed();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(elapsed < Duration::from_secs(2), "{elapsed:?}");
    assert!(stdout(&o).contains("verdict_branch -> pass"));
    let md = std::fs::read_to_string(dir.path().join("report.md")).unwrap();
    assert!(md.contains("Aggregate: **pass**. Steps found: 10/10. Windows examined: 12."));
    let json: Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(json["status"], "succeeded");
    let events = std::fs::read_to_string(dir.path().join("events.jsonl")).unwrap();
    assert_eq!(
        events.lines().count(),
        json["event_count"].as_u64().unwrap() as usize
    );
}

#[test]
fn run_fail_includes_debug() {
    let dir = tempfile::tempdir().unwrap();
    let o = telehub(&[
        "run",
        "prebuilt:ai5gtest",
        "--bind",
        "raw_trace=prebuilt:ai5gtest/registration_missing_auth.trace",
        "--approve",
        "auto",
        "--report",
        s(dir.path()),
    ]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    let md = std::fs::read_to_string(dir.path().join("report.md")).unwrap();
    assert!(md.contains("## Debug analysis"));
    assert!(md.contains("nearest record name AuthenticationRequest (edit distance 5)"));
}

#[test]
fn run_deny_lands_rework() {
    let dir = tempfile::tempdir().unwrap();
    let o = telehub(&[
        "run",
        "prebuilt:ai5gtest",
        "--approve",
        "deny",
        "--report",
        s(dir.path()),
    ]);
    assert_eq!(code(&o), 1);
    let json: Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(json["rework"].as_array().unwrap().len(), 1);
    assert_eq!(json["node_status"]["validation"], "skipped");
}

#[test]
fn run_interactive_reads_answer() {
    let mut child = bin()
        .args(["run", "prebuilt:ai5gtest"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"y\n").unwrap();
    let o = child.wait_with_output().unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("procedural flow reg-basic:"));
    assert!(out.contains("6. NAS AuthenticationResponse UL"));

    // closed stdin means nobody answered
    let o = bin()
        .args(["run", "prebuilt:ai5gtest"])
        .stdin(Stdio::null())
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn run_node_error_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("nodir.trace");
    std::fs::write(
        &trace,
        "{\"protocol\":\"RRC\",\"name\":\"RRCSetupRequest\",\"timestamp_us\":1,\"index\":0}\n",
    )
    .unwrap();
    let o = telehub(&[
        "run",
        "prebuilt:ai5gtest",
        "--bind",
        &format!("raw_trace={}", s(&trace)),
        "--approve",
        "auto",
    ]);
    assert_eq!(code(&o), 3, "{}", stdout(&o));
    assert!(stdout(&o).contains("run ") && stdout(&o).contains(" failed"));
}

#[test]
fn run_usage_errors() {
    assert_eq!(
        code(&telehub(&[
            "run",
            "prebuilt:ai5gtest",
            "--approve",
            "maybe"
        ])),
        2
    );
    assert_eq!(
        code(&telehub(&["run", "prebuilt:ai5gtest", "--bind", "novalue"])),
        2
    );
    assert_eq!(code(&telehub(&["run", "prebuilt:nope"])), 2);
    let o = telehub(&["run", &fixture("graphs/minimal.json"), "--approve", "auto"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("src"), "{}", stderr(&o));
    assert_eq!(code(&telehub(&["run", &fixture("graphs/cycle.json")])), 2);
    assert_eq!(code(&telehub(&[])), 2);
}

#[test]
fn run_minimal_graph_with_binding() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("note.txt");
    std::fs::write(&input, "hello").unwrap();
    let o = telehub(&[
        "run",
        &fixture("graphs/minimal.json"),
        "--bind",
        &format!("src={}", s(&input)),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("telehub.toml");
    std::fs::write(&cfg, "approve = \"deny\"\nagents = \"mock\"\n").unwrap();
    let o = telehub(&["--config", s(&cfg), "run", "prebuilt:ai5gtest"]);
    assert_eq!(code(&o), 1);
    // flags win over the file
    let o = telehub(&[
        "--config",
        s(&cfg),
        "run",
        "prebuilt:ai5gtest",
        "--approve",
        "auto",
    ]);
    assert_eq!(code(&o), 0);

    std::fs::write(&cfg, "colour = \"blue\"\n").unwrap();
    let o = telehub(&["--config", s(&cfg), "prebuilt", "list"]);
    assert_eq!(code(&o), 2);
    let o = telehub(&["--config", "/nonexistent.toml", "prebuilt", "list"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn ingest_formats() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.trace");

    let o = telehub(&[
        "ingest",
        "pcap",
        &fixture("pcap/tiny_usec_le.pcap"),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stdout(&o), "3\n");
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text
        .lines()
        .next()
        .unwrap()
        .contains("\"timestamp_us\":1704067200001000"));

    let o = telehub(&[
        "ingest",
        "pcap",
        &fixture("pcap/tiny_truncated.pcap"),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("TruncatedRecord"), "{}", stderr(&o));

    let export = dir.path().join("ai5gtest");
    assert_eq!(
        code(&telehub(&["prebuilt", "export", "ai5gtest", s(&export)])),
        0
    );
    let o = telehub(&[
        "ingest",
        "log",
        s(&export.join("gnb.log")),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "3\n");
    let lines: Vec<Value> = std::fs::read_to_string(&out)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let dirs: Vec<&str> = lines
        .iter()
        .map(|l| l["direction"].as_str().unwrap())
        .collect();
    assert_eq!(dirs, ["UL", "DL", "UL"]);
    let o = telehub(&[
        "ingest",
        "log",
        s(&export.join("gnb.log")),
        "--out",
        s(&out),
        "--ue-side",
    ]);
    assert_eq!(code(&o), 0);
    assert!(std::fs::read_to_string(&out)
        .unwrap()
        .starts_with("{\"direction\":\"DL\""));

    let o = telehub(&[
        "ingest",
        "trace",
        s(&export.join("registration.trace")),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "12\n");

    let o = telehub(&["ingest", "pcap", "/nonexistent.pcap", "--out", s(&out)]);
    assert_eq!(code(&o), 2);
    let o = telehub(&[
        "ingest",
        "trace",
        &fixture("graphs/minimal.json"),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 3);
}

#[test]
fn prebuilt_list_and_export() {
    let o = telehub(&["prebuilt", "list"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o)
        .lines()
        .any(|l| l.split('\t').next() == Some("ai5gtest")));

    let dir = tempfile::tempdir().unwrap();
    let o = telehub(&["prebuilt", "export", "ai5gtest", s(dir.path())]);
    assert_eq!(code(&o), 0);
    let manifest = telehub_core::prebuilt::entry("ai5gtest").unwrap();
    for f in &manifest.fixtures {
        let bytes = std::fs::read(dir.path().join(&f.name)).unwrap();
        assert_eq!(bytes.len(), f.bytes, "{}", f.name);
    }
    for name in ["graph.json", "agents.json", "manifest.json"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }

    // the export runs on its own, bindings taken from its manifest
    let o = telehub(&[
        "run",
        s(&dir.path().join("graph.json")),
        "--approve",
        "auto",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = telehub(&["validate", s(&dir.path().join("graph.json"))]);
    assert_eq!(code(&o), 0);

    assert_eq!(
        code(&telehub(&["prebuilt", "export", "nope", s(dir.path())])),
        2
    );
}

#[test]
fn serve_on_occupied_port_exits_3() {
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().port().to_string();
    let o = telehub(&["serve", "--port", &port]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("cannot bind"));
}

struct Server {
    child: std::process::Child,
    base: String,
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn spawn_server(data_dir: &Path, token: &str) -> Server {
    let mut child = bin()
        .args(["serve", "--port", "0", "--data-dir", s(data_dir)])
        .env("TELEHUB_TOKEN", token)
        .stderr(Stdio::piped())
        .stdout(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stderr.take().unwrap())
        .read_line(&mut line)
        .unwrap();
    let base = line
        .trim()
        .strip_prefix("listening on ")
        .expect("listen line")
        .to_string();
    Server { child, base }
}

#[test]
fn serve_answers_requests() {
    let dir = tempfile::tempdir().unwrap();
    let server = spawn_server(dir.path(), "t0k");
    let client = reqwest::blocking::Client::new();
    let url = format!("{}/prebuilt", server.base);
    let resp = client.get(&url).send().unwrap();
    assert_eq!(resp.status().as_u16(), 401);
    let resp = client.get(&url).bearer_auth("t0k").send().unwrap();
    assert_eq!(resp.status().as_u16(), 200);
    let v: Value = resp.json().unwrap();
    assert_eq!(v["prebuilt"][0]["id"], "ai5gtest");
    let resp = client
        .post(format!("{}/prebuilt/ai5gtest/instantiate", server.base))
        .bearer_auth("t0k")
        .send()
        .unwrap();
    assert_eq!(resp.status().as_u16(), 201);
    assert!(
        PathBuf::from(dir.path())
            .join("graphs")
            .read_dir()
            .unwrap()
            .count()
            > 0
    );
}
