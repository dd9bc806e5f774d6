use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use tracing_subscriber::EnvFilter;

use telehub_core::agents::{AgentInvoker, AgentMode, EndpointConfig};
use telehub_core::context::{ApprovalFlag, ProceduralFlow};
use telehub_core::engine::{export_report, DefaultResolver, Engine, Run, RunOptions, RunStatus};
use telehub_core::graph::{parse_graph_document, validate_graph, WorkflowGraph};
use telehub_core::ingest::{
    extract_message_records, parse_decoded_trace, parse_pcap, parse_srsran_log, write_decoded_trace,
};
use telehub_core::prebuilt::{self, ManifestEntry};
use telehub_core::service::{self, ServiceConfig};

const EXIT_PASS: u8 = 0;
const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

/// Branch names that mark a completed run as not passing.
const FAIL_BRANCHES: [&str; 3] = ["fail", "partial", "reject"];

#[derive(Debug, Parser)]
#[command(
    name = "telehub",
    version,
    about = "Telecom multi-agent workflow engine"
)]
struct Cli {
    /// TOML file with defaults for any flag.
    #[arg(long, global = true, env = "TELEHUB_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a graph document and print its diagnostics.
    Validate { graph: PathBuf },
    /// Execute a graph to completion.
    Run(RunArgs),
    /// Convert a capture or log into decoded-trace lines.
    Ingest {
        format: IngestFormat,
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Treat the log as UE-side (Tx uplink, Rx downlink).
        #[arg(long)]
        ue_side: bool,
    },
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// Bundled workflows.
    Prebuilt {
        #[command(subcommand)]
        action: PrebuiltAction,
    },
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// Graph document path, or `prebuilt:<id>` for a bundled graph.
    graph: String,
    /// Input binding, `node=path`. Repeatable.
    #[arg(long = "bind", value_name = "NODE=PATH", value_parser = parse_binding)]
    bind: Vec<(String, String)>,
    #[arg(long, value_enum)]
    agents: Option<AgentsFlag>,
    #[arg(long, value_enum)]
    approve: Option<ApproveFlag>,
    /// Directory for report.json, report.md and events.jsonl.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct ServeArgs {
    #[arg(long)]
    port: Option<u16>,
    #[arg(long)]
    host: Option<String>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long, env = "TELEHUB_TOKEN", hide_env_values = true)]
    token: Option<String>,
    /// Built canvas assets, served under /ui.
    #[arg(long)]
    static_dir: Option<PathBuf>,
    /// Backend for /chat.
    #[arg(long, value_enum)]
    agents: Option<AgentsFlag>,
}

#[derive(Debug, Subcommand)]
enum PrebuiltAction {
    List,
    Export { id: String, dir: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum AgentsFlag {
    Mock,
    Live,
}

impl From<AgentsFlag> for AgentMode {
    fn from(f: AgentsFlag) -> Self {
        match f {
            AgentsFlag::Mock => AgentMode::Mock,
            AgentsFlag::Live => AgentMode::Live,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ApproveFlag {
    Auto,
    Deny,
    Interactive,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum IngestFormat {
    Pcap,
    Trace,
    Log,
}

/// Same keys as the flags. Flags win.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    agents: Option<AgentsFlag>,
    approve: Option<ApproveFlag>,
    report: Option<PathBuf>,
    #[serde(default)]
    bind: BTreeMap<String, String>,
    port: Option<u16>,
    host: Option<String>,
    data_dir: Option<PathBuf>,
    token: Option<String>,
    static_dir: Option<PathBuf>,
    #[serde(default)]
    endpoints: Vec<EndpointConfig>,
}

struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn runtime(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_RUNTIME,
        message: message.into(),
    }
}

fn parse_binding(s: &str) -> Result<(String, String), String> {
    match s.split_once('=') {
        Some((k, v)) if !k.is_empty() && !v.is_empty() => Ok((k.to_string(), v.to_string())),
        _ => Err(format!("expected NODE=PATH, got {s:?}")),
    }
}

fn load_config(path: Option<&Path>) -> Result<FileConfig, Failure> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_env("TELEHUB_LOG").unwrap_or_else(|_| EnvFilter::new("warn")),
        )
        .with_writer(io::stderr)
        .init();
    let cli = Cli::parse();
    let result = load_config(cli.config.as_deref()).and_then(|config| match cli.command {
        Command::Validate { graph } => cmd_validate(&graph),
        Command::Run(args) => cmd_run(args, config),
        Command::Ingest {
            format,
            input,
            out,
            ue_side,
        } => cmd_ingest(format, &input, &out, ue_side),
        Command::Serve(args) => cmd_serve(args, config),
        Command::Prebuilt { action } => cmd_prebuilt(action),
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn read_graph(path: &Path) -> Result<WorkflowGraph, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    parse_graph_document(&text).map_err(|errors| {
        let lines: Vec<String> = errors.iter().map(ToString::to_string).collect();
        usage(lines.join("\n"))
    })
}

fn cmd_validate(path: &Path) -> Result<u8, Failure> {
    let graph = read_graph(path)?;
    let diagnostics = validate_graph(&graph);
    for d in &diagnostics {
        println!("{d}");
    }
    Ok(if diagnostics.is_empty() {
        EXIT_PASS
    } else {
        EXIT_USAGE
    })
}

/// The graph plus the bindings that come with it: a bundled entry's
/// defaults, or those of a `manifest.json` next to an exported graph.
fn resolve_graph(arg: &str) -> Result<(WorkflowGraph, BTreeMap<String, String>), Failure> {
    if let Some(id) = arg.strip_prefix(prebuilt::REF_PREFIX) {
        let entry =
            prebuilt::entry(id).ok_or_else(|| usage(format!("no prebuilt graph {id:?}")))?;
        let graph = prebuilt::graph(id).expect("catalog entries carry a graph");
        return Ok((graph, entry.default_bindings));
    }
    let path = Path::new(arg);
    let graph = read_graph(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let manifest = dir.join("manifest.json");
    let mut bindings = BTreeMap::new();
    if let Ok(bytes) = fs::read(&manifest) {
        if let Ok(entry) = serde_json::from_slice::<ManifestEntry>(&bytes) {
            if entry.graph == path.file_name().and_then(|n| n.to_str()).unwrap_or("") {
                for (node, r) in entry.default_bindings {
                    let r = if r.starts_with(prebuilt::REF_PREFIX) || Path::new(&r).is_absolute() {
                        r
                    } else {
                        dir.join(&r).to_string_lossy().into_owned()
                    };
                    bindings.insert(node, r);
                }
            }
        }
    }
    Ok((graph, bindings))
}

fn build_invoker(mode: AgentMode, endpoints: &[EndpointConfig]) -> AgentInvoker {
    endpoints.iter().cloned().fold(
        AgentInvoker::new(mode, prebuilt::mock_agents()),
        AgentInvoker::with_endpoint,
    )
}

fn cmd_run(args: RunArgs, config: FileConfig) -> Result<u8, Failure> {
    let (graph, mut bindings) = resolve_graph(&args.graph)?;
    bindings.extend(config.bind);
    bindings.extend(args.bind);
    let mode: AgentMode = args
        .agents
        .or(config.agents)
        .unwrap_or(AgentsFlag::Mock)
        .into();
    let approve = args
        .approve
        .or(config.approve)
        .unwrap_or(ApproveFlag::Interactive);
    let report_dir = args.report.or(config.report);

    let engine = Engine::new(
        Arc::new(build_invoker(mode, &config.endpoints)),
        Arc::new(DefaultResolver::new()),
    );
    let run = engine
        .start_run(graph, &bindings, RunOptions::default())
        .map_err(|e| usage(e.to_string()))?;
    let mut status = engine.execute(&run);
    while status == RunStatus::AwaitingApproval {
        let flag = decide(&engine, &run, approve)?;
        status = engine
            .resolve_approval(&run, flag)
            .map_err(|e| runtime(e.to_string()))?;
        status = match status {
            RunStatus::Running => engine.execute(&run),
            s => s,
        };
    }

    let state = run.snapshot();
    println!("run {} {}", state.run_id, state.status.as_str());
    for (node, branch) in &state.branches {
        println!("  {node} -> {branch}");
    }
    if let Some(r) = &state.reason {
        println!("  reason: {r}");
    }
    if let Some(dir) = &report_dir {
        let report = export_report(&state).map_err(|e| runtime(e.to_string()))?;
        report
            .write_to(dir)
            .and_then(|()| {
                let mut log = String::new();
                for e in run.events_since(0, usize::MAX) {
                    log.push_str(&serde_json::to_string(&e).expect("events serialize"));
                    log.push('\n');
                }
                fs::write(dir.join("events.jsonl"), log)
            })
            .map_err(|e| runtime(format!("writing report to {}: {e}", dir.display())))?;
        println!("report written to {}", dir.display());
    }

    Ok(match state.status {
        RunStatus::Succeeded
            if state
                .branches
                .values()
                .any(|b| FAIL_BRANCHES.contains(&b.as_str())) =>
        {
            EXIT_FAIL
        }
        RunStatus::Succeeded => EXIT_PASS,
        _ => EXIT_RUNTIME,
    })
}

fn decide(engine: &Engine, run: &Run, approve: ApproveFlag) -> Result<ApprovalFlag, Failure> {
    let now = engine.clock().now_us();
    let flag = |approved, comment: &str| ApprovalFlag {
        approved,
        reviewer: "cli".to_string(),
        comment: comment.to_string(),
        decided_at_us: now,
    };
    match approve {
        ApproveFlag::Auto => Ok(flag(true, "")),
        ApproveFlag::Deny => Ok(flag(false, "denied from the command line")),
        ApproveFlag::Interactive => {
            let state = run.snapshot();
            let pending = state
                .pending_approval
                .as_ref()
                .expect("run is awaiting approval");
            println!("approval requested at {}", pending.node_id);
            for hash in &pending.exposed {
                let Some(obj) = state.store.get(hash) else {
                    continue;
                };
                match obj.decode_payload::<ProceduralFlow>() {
                    Ok(flow) => {
                        println!("procedural flow {}:", flow.test_id);
                        for s in &flow.steps {
                            let dir = s.direction.map_or("", |d| d.as_str());
                            println!("  {:>3}. {} {} {dir}", s.step_no, s.protocol, s.name);
                        }
                    }
                    Err(_) => println!(
                        "{}",
                        serde_json::to_string_pretty(obj.payload()).unwrap_or_default()
                    ),
                }
            }
            let approved = ask("approve? [y/n] ")?;
            let approved = matches!(approved.trim(), "y" | "Y" | "yes");
            let comment = if approved {
                String::new()
            } else {
                ask("comment: ").map_or_else(|_| String::new(), |c| c.trim().to_string())
            };
            Ok(flag(approved, &comment))
        }
    }
}

fn ask(prompt: &str) -> Result<String, Failure> {
    print!("{prompt}");
    io::stdout().flush().ok();
    let mut line = String::new();
    match io::stdin().lock().read_line(&mut line) {
        Ok(0) => Err(usage(
            "no answer on standard input; use --approve auto or deny",
        )),
        Ok(_) => Ok(line),
        Err(e) => Err(runtime(e.to_string())),
    }
}

fn cmd_ingest(
    format: IngestFormat,
    input: &Path,
    out: &Path,
    ue_side: bool,
) -> Result<u8, Failure> {
    let bytes =
        fs::read(input).map_err(|e| usage(format!("cannot read {}: {e}", input.display())))?;
    let records = match format {
        IngestFormat::Pcap => parse_pcap(&bytes)
            .map_err(|e| runtime(format!("{e:?}: {e}")))?
            .to_message_records(),
        IngestFormat::Trace => {
            let text = String::from_utf8(bytes).map_err(|e| runtime(e.to_string()))?;
            parse_decoded_trace(&text).map_err(|e| runtime(format!("{e:?}: {e}")))?
        }
        IngestFormat::Log => {
            let text = String::from_utf8_lossy(&bytes);
            let parsed = parse_srsran_log(&text);
            if !parsed.skipped.is_empty() {
                tracing::info!("{} lines did not parse", parsed.skipped.len());
            }
            extract_message_records(&parsed.lines, ue_side)
        }
    };
    fs::write(out, write_decoded_trace(&records))
        .map_err(|e| runtime(format!("cannot write {}: {e}", out.display())))?;
    println!("{}", records.len());
    Ok(EXIT_PASS)
}

fn cmd_serve(args: ServeArgs, config: FileConfig) -> Result<u8, Failure> {
    let host = args
        .host
        .or(config.host)
        .unwrap_or_else(|| "127.0.0.1".into());
    let port = args.port.or(config.port).unwrap_or(8080);
    let service_config = ServiceConfig {
        data_dir: args.data_dir.or(config.data_dir),
        token: args.token.or(config.token),
        static_dir: args.static_dir.or(config.static_dir),
        endpoints: config.endpoints,
        chat_mode: args
            .agents
            .or(config.agents)
            .unwrap_or(AgentsFlag::Mock)
            .into(),
    };
    let rt = tokio::runtime::Runtime::new().map_err(|e| runtime(e.to_string()))?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind((host.as_str(), port))
            .await
            .map_err(|e| runtime(format!("cannot bind {host}:{port}: {e}")))?;
        eprintln!(
            "listening on http://{}",
            listener.local_addr().map_err(|e| runtime(e.to_string()))?
        );
        service::serve_on(service_config, listener)
            .await
            .map_err(|e| runtime(e.to_string()))
    })?;
    Ok(EXIT_PASS)
}

fn cmd_prebuilt(action: PrebuiltAction) -> Result<u8, Failure> {
    match action {
        PrebuiltAction::List => {
            for e in prebuilt::manifest().entries {
                println!("{}\t{}", e.id, e.title);
            }
        }
        PrebuiltAction::Export { id, dir } => {
            let written = prebuilt::export(&id, &dir).map_err(|e| match e {
                prebuilt::PrebuiltError::UnknownEntry(_) => usage(e.to_string()),
                _ => runtime(e.to_string()),
            })?;
            for p in written {
                println!("{}", p.display());
            }
        }
    }
    Ok(EXIT_PASS)
}
