use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use clap::{Args, Parser, Subcommand, ValueEnum};

use dashsnap_core::data::DataSourceRegistry;
use dashsnap_core::lifecycle::{infer_freshness, materialize, Clock, FixedClock, SystemClock, VirtualClock};
use dashsnap_core::model::{is_stale, SnapshotSpec};
use dashsnap_core::scenario;
use dashsnap_core::spec_io::{self, parse_dashboard, parse_datetime, parse_snapshot};
use dashsnap_core::store::SourceRef;
use dashsnap_core::template::{BadgeKind, Catalog, RenderNode};
use dashsnap_core::workspace::Workspace;

use crate::api::{router, AppState, ClockMode};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 1;
pub const EXIT_IO: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "dashsnap", version, about = "Dashboard snapshots: lint, render, schedule and serve")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a snapshot, component or dashboard file.
    Lint {
        spec: PathBuf,
        /// CSV data, as `id=path` or a bare path used for every source.
        #[arg(long)]
        data: Vec<String>,
    },
    /// Render each component to SVG and caption text, plus a layout manifest.
    Render {
        spec: PathBuf,
        #[arg(long, required = true)]
        data: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_parser = parse_now)]
        now: Option<NaiveDateTime>,
    },
    /// Print the inferred and declared freshness of a snapshot.
    Freshness {
        spec: PathBuf,
        #[arg(long, value_parser = parse_now)]
        now: Option<NaiveDateTime>,
    },
    /// Run one scheduler pass over a store.
    Tick {
        #[arg(long, env = "STORE_PATH")]
        store: PathBuf,
        #[arg(long, value_parser = parse_now)]
        now: Option<NaiveDateTime>,
    },
    /// Add sources, dashboards, snapshots and channels to a store, and publish.
    Import(ImportArgs),
    /// Serve the HTTP API.
    Serve {
        #[arg(long, env = "STORE_PATH")]
        store: Option<PathBuf>,
        #[arg(long, env = "PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, env = "CLOCK_MODE", value_enum, default_value_t = ClockArg::Wall)]
        clock: ClockArg,
        /// Start of the virtual clock.
        #[arg(long, value_parser = parse_now)]
        now: Option<NaiveDateTime>,
        /// Seconds between scheduler passes on the wall clock.
        #[arg(long, default_value_t = 60)]
        tick_secs: u64,
    },
    /// Scripted end-to-end scenarios.
    Scenario {
        #[command(subcommand)]
        command: ScenarioCommand,
    },
}

#[derive(Debug, Subcommand)]
pub enum ScenarioCommand {
    Run {
        script: PathBuf,
        /// Save the resulting store here.
        #[arg(long)]
        store_out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct ImportArgs {
    #[arg(long, env = "STORE_PATH")]
    pub store: PathBuf,
    /// `id=path` of a CSV file.
    #[arg(long)]
    pub source: Vec<String>,
    #[arg(long)]
    pub dashboard: Vec<PathBuf>,
    #[arg(long)]
    pub snapshot: Vec<PathBuf>,
    /// Channel id; members are not tracked from here.
    #[arg(long)]
    pub channel: Vec<String>,
    /// `snapshot@channel`, posted by the snapshot's author.
    #[arg(long)]
    pub publish: Vec<String>,
    #[arg(long, value_parser = parse_now)]
    pub now: Option<NaiveDateTime>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClockArg {
    Wall,
    Virtual,
}

fn parse_now(s: &str) -> Result<NaiveDateTime, String> {
    parse_datetime(s).ok_or_else(|| format!("{s:?} is not an ISO-8601 timestamp"))
}

/// A failed command: what to print and how to exit.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

fn io(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_IO,
        message: format!("{}: {e}", path.display()),
    }
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_INVALID,
        message: message.into(),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| io(path, e))
}

fn clock_at(now: Option<NaiveDateTime>) -> Box<dyn Clock> {
    match now {
        Some(t) => Box::new(FixedClock(t)),
        None => Box::new(SystemClock),
    }
}

/// Builds a registry from `--data` values. A bare path serves every source the file
/// names that no `id=path` entry covers.
fn registry(data: &[String], spec_sources: &[String]) -> Result<DataSourceRegistry, Failure> {
    let mut named = BTreeMap::new();
    let mut fallback = None;
    for d in data {
        match d.split_once('=') {
            Some((id, path)) => {
                named.insert(id.to_string(), PathBuf::from(path));
            }
            None => fallback = Some(PathBuf::from(d)),
        }
    }
    let mut reg = DataSourceRegistry::new();
    for (id, p) in &named {
        if !p.exists() {
            return Err(io(p, "no such file"));
        }
        reg.insert_csv(id, p, None);
    }
    if let Some(p) = fallback {
        if !p.exists() {
            return Err(io(&p, "no such file"));
        }
        for id in spec_sources.iter().filter(|id| !named.contains_key(*id)) {
            reg.insert_csv(id, &p, None);
        }
    }
    Ok(reg)
}

fn sources_of(text: &str) -> Vec<String> {
    match spec_io::parse_document(text).map(|d| d.parsed) {
        Ok(spec_io::ParsedSpec::Snapshot(s)) => s.components.iter().map(|c| c.data_source.clone()).collect(),
        Ok(spec_io::ParsedSpec::Component(c)) => vec![c.data_source],
        Ok(spec_io::ParsedSpec::Dashboard(d)) => d.panels.iter().map(|p| p.data_source.clone()).collect(),
        Err(_) => Vec::new(),
    }
}

fn lint(spec: &Path, data: &[String], out: &mut String) -> Result<u8, Failure> {
    let text = read(spec)?;
    let reg = if data.is_empty() { None } else { Some(registry(data, &sources_of(&text))?) };
    let report = spec_io::lint(&text, reg.as_ref(), &Catalog::builtin());
    if report.is_empty() {
        let _ = writeln!(out, "{}: ok", spec.display());
        return Ok(EXIT_OK);
    }
    for v in &report.violations {
        let _ = writeln!(out, "{}:{v}", spec.display());
    }
    Ok(EXIT_INVALID)
}

fn load_snapshot(spec: &Path) -> Result<SnapshotSpec, Failure> {
    parse_snapshot(&read(spec)?).map_err(|e| invalid(format!("{}:{e}", spec.display())))
}

fn caption_file(node: &RenderNode, transparency: &dashsnap_core::lifecycle::TransparencyBlock) -> String {
    let mut s = String::new();
    for c in node.captions() {
        let _ = writeln!(s, "{c}");
    }
    for (kind, text) in node.badges() {
        let kind = match kind {
            BadgeKind::NoData => "no-data",
            BadgeKind::Error => "error",
            BadgeKind::Warning => "warning",
        };
        let _ = writeln!(s, "[{kind}] {text}");
    }
    let _ = writeln!(s, "---");
    let _ = writeln!(s, "time frame: {}", transparency.time_frame);
    for f in &transparency.filters {
        let _ = writeln!(s, "filter: {f}");
    }
    s
}

fn render(spec: &Path, data: &[String], out_dir: &Path, now: Option<NaiveDateTime>, out: &mut String) -> Result<u8, Failure> {
    let s = load_snapshot(spec)?;
    let sources: Vec<String> = s.components.iter().map(|c| c.data_source.clone()).collect();
    let reg = registry(data, &sources)?;
    let catalog = Catalog::builtin();
    let report = dashsnap_core::model::validate_snapshot(&s, &reg, &catalog);
    if !report.is_empty() {
        let located = spec_io::locate(report, &read(spec)?);
        for v in &located.violations {
            let _ = writeln!(out, "{}:{v}", spec.display());
        }
        return Ok(EXIT_INVALID);
    }
    let clock = clock_at(now);
    let r = materialize(&s, &reg, &catalog, clock.as_ref());
    fs::create_dir_all(out_dir).map_err(|e| io(out_dir, e))?;
    let mut manifest = Vec::new();
    for c in &r.layout.components {
        let mut files = Vec::new();
        for (i, svg) in c.node.svgs().into_iter().enumerate() {
            let name = if i == 0 { format!("{}.svg", c.component_id) } else { format!("{}-{}.svg", c.component_id, i + 1) };
            fs::write(out_dir.join(&name), svg).map_err(|e| io(&out_dir.join(&name), e))?;
            files.push(name);
        }
        let name = format!("{}.txt", c.component_id);
        fs::write(out_dir.join(&name), caption_file(&c.node, &c.transparency)).map_err(|e| io(&out_dir.join(&name), e))?;
        files.push(name);
        manifest.push(serde_json::json!({
            "component": c.component_id,
            "files": files,
            "transparency": c.transparency,
        }));
    }
    let layout = serde_json::json!({
        "snapshot": r.snapshot_id,
        "version": r.version,
        "title": r.title,
        "curation": r.layout.curation,
        "freshness": r.freshness_badge,
        "completeness": r.completeness_badge,
        "text-message": r.text_message,
        "produced-at": r.produced_at,
        "components": manifest,
    });
    let text = serde_json::to_string_pretty(&layout).unwrap_or_default();
    fs::write(out_dir.join("layout.json"), text).map_err(|e| io(&out_dir.join("layout.json"), e))?;
    let _ = writeln!(out, "rendered {} component(s) to {}", r.layout.components.len(), out_dir.display());
    Ok(EXIT_OK)
}

fn freshness(spec: &Path, now: Option<NaiveDateTime>, out: &mut String) -> Result<u8, Failure> {
    let s = load_snapshot(spec)?;
    let inferred = infer_freshness(&s.components);
    let today = clock_at(now).today();
    let _ = writeln!(out, "declared: {}", s.freshness);
    match inferred {
        Some(d) => {
            let _ = writeln!(out, "inferred: {d}");
        }
        None => {
            let _ = writeln!(out, "inferred: none");
        }
    }
    let _ = writeln!(out, "stale on {today}: {}", is_stale(s.freshness, today));
    Ok(EXIT_OK)
}

fn open(store: &Path) -> Result<Workspace, Failure> {
    Workspace::open(store).map_err(|e| match e {
        dashsnap_core::workspace::WorkspaceError::Store(dashsnap_core::store::StoreError::Io { .. }) => io(store, e),
        e => invalid(format!("{}: {e}", store.display())),
    })
}

fn tick(store: &Path, now: Option<NaiveDateTime>, out: &mut String) -> Result<u8, Failure> {
    let mut ws = open(store)?;
    let clock = clock_at(now);
    let result = ws.tick(clock.as_ref());
    for u in &result.report.updates {
        let _ = writeln!(out, "published {} v{} at {}", u.snapshot_id, u.version, clock.now());
    }
    for f in &result.report.failures {
        let _ = writeln!(out, "failed {}: {} {}", f.snapshot_id, f.code, f.message);
    }
    if result.report.updates.is_empty() && result.report.failures.is_empty() {
        let _ = writeln!(out, "nothing due at {}", clock.now());
    }
    ws.save(store).map_err(|e| io(store, e))?;
    Ok(if result.report.failures.is_empty() { EXIT_OK } else { EXIT_INVALID })
}

fn import(a: &ImportArgs, out: &mut String) -> Result<u8, Failure> {
    let mut ws = open(&a.store)?;
    let clock = clock_at(a.now);
    for s in &a.source {
        let (id, path) = s.split_once('=').ok_or_else(|| invalid(format!("--source {s:?} must be id=path")))?;
        let p = PathBuf::from(path);
        let p = if p.is_relative() { std::env::current_dir().map_err(|e| io(&p, e))?.join(p) } else { p };
        if !p.exists() {
            return Err(io(&p, "no such file"));
        }
        ws.add_source(id, SourceRef { path: p, schema: None });
        let _ = writeln!(out, "source {id}");
    }
    for p in &a.dashboard {
        let d = parse_dashboard(&read(p)?).map_err(|e| invalid(format!("{}:{e}", p.display())))?;
        let _ = writeln!(out, "dashboard {}", d.id);
        ws.add_dashboard(d);
    }
    for c in &a.channel {
        if !ws.store.platform.channels.contains_key(c) {
            ws.add_channel(c, c, Vec::new()).map_err(|e| invalid(e.to_string()))?;
            let _ = writeln!(out, "channel {c}");
        }
    }
    for p in &a.snapshot {
        let s = load_snapshot(p)?;
        let id = s.id.clone();
        ws.add_snapshot(s, clock.as_ref()).map_err(|e| invalid(format!("{}: {e}", p.display())))?;
        let _ = writeln!(out, "snapshot {id}");
    }
    for p in &a.publish {
        let (sid, ch) = p.split_once('@').ok_or_else(|| invalid(format!("--publish {p:?} must be snapshot@channel")))?;
        let author = ws.snapshot(sid, None).map_err(|e| invalid(e.to_string()))?.author.clone();
        let mid = ws.publish(sid, ch, None, &author, clock.as_ref()).map_err(|e| invalid(e.to_string()))?;
        let _ = writeln!(out, "message {mid}: {sid} in {ch}");
    }
    ws.save(&a.store).map_err(|e| io(&a.store, e))?;
    Ok(EXIT_OK)
}

fn scenario_run(script: &Path, store_out: Option<&Path>, out: &mut String) -> Result<u8, Failure> {
    let (report, ws) = scenario::run_file(script).map_err(|e| match e {
        scenario::ScenarioError::Io { ref path, .. } => io(path, e.to_string()),
        e => invalid(e.to_string()),
    })?;
    for s in &report.steps {
        let mark = if s.ok { "ok  " } else { "FAIL" };
        let _ = writeln!(out, "{mark} {:>2} {:<12} {}", s.index, s.step, s.detail);
    }
    let verdict = if report.passed { "passed" } else { "failed" };
    let _ = writeln!(out, "scenario {verdict} in {} ms", report.elapsed_ms);
    if let Some(p) = store_out {
        ws.save(p).map_err(|e| io(p, e))?;
    }
    Ok(if report.passed { EXIT_OK } else { EXIT_INVALID })
}

async fn serve(
    store: Option<PathBuf>,
    port: u16,
    clock: ClockArg,
    now: Option<NaiveDateTime>,
    tick_secs: u64,
) -> Result<u8, Failure> {
    let ws = match &store {
        Some(p) => open(p)?,
        None => Workspace::default(),
    };
    let mode = match clock {
        ClockArg::Wall => ClockMode::Wall,
        ClockArg::Virtual => ClockMode::Virtual(std::sync::Arc::new(VirtualClock::new(
            now.unwrap_or_else(|| SystemClock.now()),
        ))),
    };
    let wall = matches!(mode, ClockMode::Wall);
    let state = AppState::new(ws, mode, store);
    if wall {
        let st = state.clone();
        tokio::spawn(async move {
            let mut every = tokio::time::interval(std::time::Duration::from_secs(tick_secs.max(1)));
            loop {
                every.tick().await;
                if let Err(e) = st.tick() {
                    eprintln!("tick: {}", e.message);
                }
            }
        });
    }
    let addr = std::net::SocketAddr::from(([0, 0, 0, 0], port));
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| Failure {
        code: EXIT_IO,
        message: format!("cannot listen on {addr}: {e}"),
    })?;
    eprintln!("listening on {addr}");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| Failure {
            code: EXIT_IO,
            message: e.to_string(),
        })?;
    Ok(EXIT_OK)
}

/// Runs a command, writing its report to `out`. `serve` blocks until interrupted.
pub fn run(cli: Cli, out: &mut String) -> u8 {
    let result = match cli.command {
        Command::Lint { spec, data } => lint(&spec, &data, out),
        Command::Render { spec, data, out: dir, now } => render(&spec, &data, &dir, now, out),
        Command::Freshness { spec, now } => freshness(&spec, now, out),
        Command::Tick { store, now } => tick(&store, now, out),
        Command::Import(a) => import(&a, out),
        Command::Scenario {
            command: ScenarioCommand::Run { script, store_out },
        } => scenario_run(&script, store_out.as_deref(), out),
        Command::Serve {
            store,
            port,
            clock,
            now,
            tick_secs,
        } => match tokio::runtime::Runtime::new() {
            Ok(rt) => rt.block_on(serve(store, port, clock, now, tick_secs)),
            Err(e) => Err(Failure {
                code: EXIT_IO,
                message: e.to_string(),
            }),
        },
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(out, "error: {}", f.message);
            f.code
        }
    }
}
