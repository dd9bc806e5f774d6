//! C ABI over telehub-core.
//!
//! Every fallible function returns a [`TelehubStatus`]; on failure the
//! message is available from [`telehub_last_error`] on the same thread.
//! Strings handed out through `char **out` parameters belong to the caller
//! and must be released with [`telehub_string_free`]. Handles are released
//! with their own `_free` function.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use serde_json::Value;
use telehub_core::agents::{AgentInvoker, AgentMode};
use telehub_core::context::{
    self, canonicalize, decode, make_object, project, validate_payload, ApprovalFlag,
    ContextObject, FieldSelector, Origin, Schema,
};
use telehub_core::engine::{
    export_report, ApprovalError, DefaultResolver, Engine, Run, RunOptions, RunStatus, StartError,
};
use telehub_core::graph::{graph_from_value, topo_order, validate_graph};
use telehub_core::ingest::{
    extract_message_records, parse_pcap, parse_srsran_log, write_decoded_trace,
};
use telehub_core::prebuilt;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TelehubStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidJson = 3,
    UnknownSchema = 4,
    PayloadInvalid = 5,
    InvalidGraph = 6,
    UnboundInput = 7,
    WrongState = 8,
    InvalidFlag = 9,
    ParseError = 10,
    NotFound = 11,
    Internal = 12,
    Panic = 13,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TelehubRunStatus {
    Pending = 0,
    Running = 1,
    AwaitingApproval = 2,
    Succeeded = 3,
    Failed = 4,
    Cancelled = 5,
}

impl From<RunStatus> for TelehubRunStatus {
    fn from(s: RunStatus) -> Self {
        match s {
            RunStatus::Pending => TelehubRunStatus::Pending,
            RunStatus::Running => TelehubRunStatus::Running,
            RunStatus::AwaitingApproval => TelehubRunStatus::AwaitingApproval,
            RunStatus::Succeeded => TelehubRunStatus::Succeeded,
            RunStatus::Failed => TelehubRunStatus::Failed,
            RunStatus::Cancelled => TelehubRunStatus::Cancelled,
        }
    }
}

/// An immutable context object.
pub struct TelehubObject(ContextObject);

/// Engine with mock agents.
pub struct TelehubEngine(Engine);

pub struct TelehubRun(Arc<Run>);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(TelehubStatus, String);

impl Failure {
    fn new(status: TelehubStatus, message: impl Into<String>) -> Self {
        Failure(status, message.into())
    }
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> TelehubStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TelehubStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("panic inside telehub");
            TelehubStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(
            TelehubStatus::NullArgument,
            format!("{name} is null"),
        ));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure::new(TelehubStatus::InvalidUtf8, format!("{name}: {e}")))
}

unsafe fn opt_str_arg<'a>(p: *const c_char, name: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, name).map(Some)
    }
}

unsafe fn bytes_arg<'a>(p: *const u8, len: usize, name: &str) -> Result<&'a [u8], Failure> {
    if p.is_null() {
        if len == 0 {
            return Ok(&[]);
        }
        return Err(Failure::new(
            TelehubStatus::NullArgument,
            format!("{name} is null"),
        ));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure::new(TelehubStatus::NullArgument, format!("{name} is null")))
}

fn check_out<T>(out: *mut T) -> Result<(), Failure> {
    if out.is_null() {
        Err(Failure::new(TelehubStatus::NullArgument, "out is null"))
    } else {
        Ok(())
    }
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    check_out(out)?;
    let c = CString::new(s)
        .map_err(|_| Failure::new(TelehubStatus::Internal, "output contains a NUL byte"))?;
    *out = c.into_raw();
    Ok(())
}

unsafe fn put_handle<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    check_out(out)?;
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn json_arg(text: &str, name: &str) -> Result<Value, Failure> {
    serde_json::from_str(text)
        .map_err(|e| Failure::new(TelehubStatus::InvalidJson, format!("{name}: {e}")))
}

fn context_failure(e: context::ContextError) -> Failure {
    use context::ContextError as E;
    let status = match &e {
        E::UnregisteredSchema(_) => TelehubStatus::UnknownSchema,
        E::PayloadInvalid(_) | E::SchemaMismatch { .. } => TelehubStatus::PayloadInvalid,
        E::UnresolvablePath(_) | E::EmptySelector => TelehubStatus::PayloadInvalid,
        E::Decode(_) => TelehubStatus::InvalidJson,
    };
    Failure::new(status, e.to_string())
}

/// Message of the last failed call on this thread, or null. Owned by the
/// library; valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn telehub_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static version string.
#[no_mangle]
pub extern "C" fn telehub_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn telehub_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds and validates a context object.
///
/// # Safety
/// String arguments must be valid NUL-terminated strings; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn telehub_object_new(
    schema: *const c_char,
    payload_json: *const c_char,
    source_node_id: *const c_char,
    run_id: *const c_char,
    created_at_us: i64,
    out: *mut *mut TelehubObject,
) -> TelehubStatus {
    guard(|| {
        let schema: Schema =
            str_arg(schema, "schema")?
                .parse()
                .map_err(|e: context::schema::UnknownSchema| {
                    Failure::new(
                        TelehubStatus::UnknownSchema,
                        format!("unregistered schema {}", e.0),
                    )
                })?;
        let payload = json_arg(str_arg(payload_json, "payload_json")?, "payload_json")?;
        let origin = Origin::new(
            str_arg(source_node_id, "source_node_id")?,
            str_arg(run_id, "run_id")?,
            created_at_us,
        );
        let o = make_object(schema, payload, &origin, vec![]).map_err(context_failure)?;
        put_handle(out, TelehubObject(o))
    })
}

/// Parses canonical bytes back into an object.
///
/// # Safety
/// `bytes` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn telehub_object_decode(
    bytes: *const u8,
    len: usize,
    out: *mut *mut TelehubObject,
) -> TelehubStatus {
    guard(|| {
        let o = decode(bytes_arg(bytes, len, "bytes")?).map_err(context_failure)?;
        put_handle(out, TelehubObject(o))
    })
}

/// Canonical serialization of the whole object.
///
/// # Safety
/// `object` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn telehub_object_canonical(
    object: *const TelehubObject,
    out: *mut *mut c_char,
) -> TelehubStatus {
    guard(|| {
        let o = ref_arg(object, "object")?;
        let bytes = canonicalize(&o.0).map_err(context_failure)?;
        put_string(
            out,
            String::from_utf8(bytes).expect("canonical form is UTF-8"),
        )
    })
}

/// Hex SHA-256 content hash.
///
/// # Safety
/// `object` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn telehub_object_hash(
    object: *const TelehubObject,
    out: *mut *mut c_char,
) -> TelehubStatus {
    guard(|| {
        let o = ref_arg(object, "object")?;
        put_string(out, o.0.hash().to_string())
    })
}

/// Projection onto `paths_json`, a JSON array of dotted field paths.
///
/// # Safety
/// `object` must be a live handle, `paths_json` a valid string; `out` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn telehub_object_project(
    object: *const TelehubObject,
    paths_json: *const c_char,
    out: *mut *mut TelehubObject,
) -> TelehubStatus {
    guard(|| {
        let o = ref_arg(object, "object")?;
        let paths: Vec<String> =
            serde_json::from_value(json_arg(str_arg(paths_json, "paths_json")?, "paths_json")?)
                .map_err(|e| Failure::new(TelehubStatus::InvalidJson, e.to_string()))?;
        let p = project(&o.0, &FieldSelector::new(o.0.schema(), paths)).map_err(context_failure)?;
        put_handle(out, TelehubObject(p))
    })
}

/// # Safety
/// `object` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn telehub_object_free(object: *mut TelehubObject) {
    if !object.is_null() {
        drop(Box::from_raw(object));
    }
}

/// Validates a payload against a schema. Writes the violations as a JSON
/// array, empty when the payload is valid.
///
/// # Safety
/// String arguments must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn telehub_validate_payload(
    schema: *const c_char,
    payload_json: *const c_char,
    out: *mut *mut c_char,
) -> TelehubStatus {
    guard(|| {
        let schema = str_arg(schema, "schema")?;
        let payload = json_arg(str_arg(payload_json, "payload_json")?, "payload_json")?;
        let report = validate_payload(schema, context::SCHEMA_VERSION, &payload);
        put_string(
            out,
            serde_json::to_string(&report.violations).expect("serializes"),
        )
    })
}

/// Graph diagnostics as a JSON array. A document that does not parse is
/// `InvalidGraph` with the parse errors in the last error message.
///
/// # Safety
/// `graph_json` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn telehub_graph_validate(
    graph_json: *const c_char,
    out: *mut *mut c_char,
) -> TelehubStatus {
    guard(|| {
        let g = parse_graph(graph_json)?;
        put_string(
            out,
            serde_json::to_string(&validate_graph(&g)).expect("serializes"),
        )
    })
}

/// Node ids in execution order, as a JSON array.
///
/// # Safety
/// `graph_json` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn telehub_graph_topo_order(
    graph_json: *const c_char,
    out: *mut *mut c_char,
) -> TelehubStatus {
    guard(|| {
        let g = parse_graph(graph_json)?;
        let order =
            topo_order(&g).map_err(|e| Failure::new(TelehubStatus::InvalidGraph, e.to_string()))?;
        put_string(out, serde_json::to_string(&order).expect("serializes"))
    })
}

unsafe fn parse_graph(
    graph_json: *const c_char,
) -> Result<telehub_core::graph::WorkflowGraph, Failure> {
    let doc = json_arg(str_arg(graph_json, "graph_json")?, "graph_json")?;
    graph_from_value(&doc).map_err(|errors| {
        let lines: Vec<String> = errors.iter().map(ToString::to_string).collect();
        Failure::new(TelehubStatus::InvalidGraph, lines.join("; "))
    })
}

/// Bundled graph document for `id`.
///
/// # Safety
/// `id` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn telehub_prebuilt_graph(
    id: *const c_char,
    out: *mut *mut c_char,
) -> TelehubStatus {
    guard(|| {
        let id = str_arg(id, "id")?;
        let g = prebuilt::graph(id).ok_or_else(|| {
            Failure::new(TelehubStatus::NotFound, format!("no prebuilt graph {id:?}"))
        })?;
        put_string(out, telehub_core::graph::serialize_graph(&g))
    })
}

/// Decoded-trace lines for a pcap capture.
///
/// # Safety
/// `bytes` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn telehub_pcap_to_trace(
    bytes: *const u8,
    len: usize,
    out: *mut *mut c_char,
) -> TelehubStatus {
    guard(|| {
        let cap = parse_pcap(bytes_arg(bytes, len, "bytes")?)
            .map_err(|e| Failure::new(TelehubStatus::ParseError, format!("{e:?}: {e}")))?;
        put_string(out, write_decoded_trace(&cap.to_message_records()))
    })
}

/// Decoded-trace lines for the Tx/Rx lines of an srsRAN log.
///
/// # Safety
/// `text` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn telehub_srsran_to_trace(
    text: *const c_char,
    ue_side: bool,
    out: *mut *mut c_char,
) -> TelehubStatus {
    guard(|| {
        let parsed = parse_srsran_log(str_arg(text, "text")?);
        put_string(
            out,
            write_decoded_trace(&extract_message_records(&parsed.lines, ue_side)),
        )
    })
}

/// Engine answering every agent with the bundled mocks. File bindings are
/// read relative to `artifact_dir` when it is not null.
///
/// # Safety
/// `artifact_dir` must be null or valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn telehub_engine_new_mock(
    artifact_dir: *const c_char,
    out: *mut *mut TelehubEngine,
) -> TelehubStatus {
    guard(|| {
        let resolver = match opt_str_arg(artifact_dir, "artifact_dir")? {
            Some(d) => DefaultResolver::with_base(d),
            None => DefaultResolver::new(),
        };
        let invoker = AgentInvoker::new(AgentMode::Mock, prebuilt::mock_agents());
        put_handle(
            out,
            TelehubEngine(Engine::new(Arc::new(invoker), Arc::new(resolver))),
        )
    })
}

/// # Safety
/// `engine` must be null or a live handle with no live runs still in use.
#[no_mangle]
pub unsafe extern "C" fn telehub_engine_free(engine: *mut TelehubEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Starts a run. `bindings_json` maps input node ids to artifact
/// references and may be null when the graph has no inputs.
///
/// # Safety
/// `engine` must be a live handle, strings valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn telehub_run_start(
    engine: *const TelehubEngine,
    graph_json: *const c_char,
    bindings_json: *const c_char,
    out: *mut *mut TelehubRun,
) -> TelehubStatus {
    guard(|| {
        let engine = ref_arg(engine, "engine")?;
        let graph = parse_graph(graph_json)?;
        let bindings: BTreeMap<String, String> = match opt_str_arg(bindings_json, "bindings_json")?
        {
            Some(t) => serde_json::from_value(json_arg(t, "bindings_json")?)
                .map_err(|e| Failure::new(TelehubStatus::InvalidJson, e.to_string()))?,
            None => BTreeMap::new(),
        };
        let run = engine
            .0
            .start_run(graph, &bindings, RunOptions::default())
            .map_err(|e| {
                let status = match e {
                    StartError::InvalidGraph(_) => TelehubStatus::InvalidGraph,
                    StartError::UnboundInput(_)
                    | StartError::UnknownBinding(_)
                    | StartError::ArtifactMissing { .. } => TelehubStatus::UnboundInput,
                    StartError::EventLog(_) => TelehubStatus::Internal,
                };
                Failure::new(status, e.to_string())
            })?;
        put_handle(out, TelehubRun(run))
    })
}

/// Executes until the run finishes or pauses for approval.
///
/// # Safety
/// Handles must be live; `out_status` must be writable.
#[no_mangle]
pub unsafe extern "C" fn telehub_run_execute(
    engine: *const TelehubEngine,
    run: *const TelehubRun,
    out_status: *mut TelehubRunStatus,
) -> TelehubStatus {
    guard(|| {
        let engine = ref_arg(engine, "engine")?;
        let run = ref_arg(run, "run")?;
        check_out(out_status)?;
        *out_status = engine.0.execute(&run.0).into();
        Ok(())
    })
}

/// Resolves a pending approval, then executes on.
///
/// # Safety
/// Handles must be live, strings valid (`comment` may be null);
/// `out_status` must be writable.
#[no_mangle]
pub unsafe extern "C" fn telehub_run_approve(
    engine: *const TelehubEngine,
    run: *const TelehubRun,
    approved: bool,
    reviewer: *const c_char,
    comment: *const c_char,
    out_status: *mut TelehubRunStatus,
) -> TelehubStatus {
    guard(|| {
        let engine = ref_arg(engine, "engine")?;
        let run = ref_arg(run, "run")?;
        check_out(out_status)?;
        let flag = ApprovalFlag {
            approved,
            reviewer: str_arg(reviewer, "reviewer")?.to_string(),
            comment: opt_str_arg(comment, "comment")?.unwrap_or("").to_string(),
            decided_at_us: engine.0.clock().now_us(),
        };
        let status = engine.0.resolve_approval(&run.0, flag).map_err(|e| {
            let status = match e {
                ApprovalError::WrongState(_) => TelehubStatus::WrongState,
                ApprovalError::InvalidFlag(_) => TelehubStatus::InvalidFlag,
            };
            Failure::new(status, e.to_string())
        })?;
        let status = match status {
            RunStatus::Running => engine.0.execute(&run.0),
            s => s,
        };
        *out_status = status.into();
        Ok(())
    })
}

/// # Safety
/// `run` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn telehub_run_status(run: *const TelehubRun) -> TelehubRunStatus {
    match run.as_ref() {
        Some(r) => r.0.status().into(),
        None => TelehubRunStatus::Failed,
    }
}

/// Events with `seq > since` as a JSON array.
///
/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn telehub_run_events(
    run: *const TelehubRun,
    since: u64,
    out: *mut *mut c_char,
) -> TelehubStatus {
    guard(|| {
        let run = ref_arg(run, "run")?;
        let events = run.0.events_since(since, usize::MAX);
        put_string(out, serde_json::to_string(&events).expect("serializes"))
    })
}

/// Report of a finished run: Markdown when `markdown` is true, JSON
/// otherwise.
///
/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn telehub_run_report(
    run: *const TelehubRun,
    markdown: bool,
    out: *mut *mut c_char,
) -> TelehubStatus {
    guard(|| {
        let run = ref_arg(run, "run")?;
        let report = export_report(&run.0.snapshot())
            .map_err(|e| Failure::new(TelehubStatus::WrongState, e.to_string()))?;
        let text = if markdown {
            report.markdown
        } else {
            serde_json::to_string(&report.json).expect("serializes")
        };
        put_string(out, text)
    })
}

/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn telehub_run_free(run: *mut TelehubRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}
