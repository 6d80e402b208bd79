//! Scripted end-to-end runs: load sources and dashboards, build and publish snapshots,
//! move a virtual clock and check what the platform shows.
//!
//! ```yaml
//! clock: 2022-04-02T09:00:00
//! sources: {sales: sales.csv}
//! dashboards: [dashboard.yaml]
//! channels:
//!   - {id: sales, name: "#sales", members: [analyst]}
//! steps:
//!   - compose: {id: s, title: S, author: analyst, components: [{dashboard: d, panel: p}]}
//!   - publish: {snapshot: s, channel: sales, author: analyst}
//!   - advance: 1 month
//!   - tick
//!   - expect: {snapshot: s, version: 2, thread-replies: 1}
//! ```

use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::lifecycle::{Clock, ManualEdits, SnapshotDraft, VirtualClock};
use crate::model::{ComponentSpec, Duration};
use crate::platform::{FilterRequest, MessageId};
use crate::spec_io::decode::Decoder;
use crate::spec_io::requests::{component_request, filter_request, manual_edits, snapshot_draft_with, ComponentRequest};
use crate::spec_io::yaml::{parse_node, Node};
use crate::spec_io::{parse_dashboard, parse_snapshot, read, ParseError};
use crate::store::SourceRef;
use crate::workspace::Workspace;

#[derive(Debug, Clone, PartialEq)]
pub enum ComponentSource {
    FromPanel(ComponentRequest),
    Spec(ComponentSpec),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Expectation {
    pub snapshot: String,
    pub version: Option<u32>,
    /// Replies carrying the snapshot in the thread of its first post.
    pub thread_replies: Option<usize>,
    /// Versions whose every post must be superseded.
    pub superseded: Vec<u32>,
    /// Total annotations across the current version's components.
    pub annotations: Option<usize>,
    pub stale: Option<bool>,
    /// Failures reported by the most recent tick.
    pub tick_failures: Option<usize>,
    /// Text that must appear in some caption of the current render.
    pub caption_contains: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Compose {
        draft: SnapshotDraft,
        components: Vec<ComponentSource>,
    },
    AddSnapshot(PathBuf),
    Publish {
        snapshot: String,
        channel: String,
        author: String,
        thread: Option<MessageId>,
    },
    Advance(Duration),
    SetClock(NaiveDateTime),
    Tick,
    Update {
        snapshot: String,
        author: String,
        edits: ManualEdits,
    },
    Filter {
        message: MessageId,
        component: String,
        viewer: String,
        request: FilterRequest,
    },
    Expect(Expectation),
}

impl Step {
    pub fn name(&self) -> &'static str {
        match self {
            Step::Compose { .. } => "compose",
            Step::AddSnapshot(_) => "add-snapshot",
            Step::Publish { .. } => "publish",
            Step::Advance(_) => "advance",
            Step::SetClock(_) => "set-clock",
            Step::Tick => "tick",
            Step::Update { .. } => "update",
            Step::Filter { .. } => "filter",
            Step::Expect(_) => "expect",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDef {
    pub id: String,
    pub name: String,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Script {
    pub clock: NaiveDateTime,
    pub sources: Vec<(String, PathBuf)>,
    pub dashboards: Vec<PathBuf>,
    pub channels: Vec<ChannelDef>,
    pub steps: Vec<Step>,
}

type R<T> = Result<T, ParseError>;

fn component_source(d: &mut Decoder, node: &Node, path: &str) -> R<ComponentSource> {
    let from_panel = node.as_map().is_some_and(|m| m.iter().any(|(k, _)| k.text == "dashboard"));
    if from_panel {
        component_request(d, node, path).map(ComponentSource::FromPanel)
    } else {
        read::component(d, node, path).map(ComponentSource::Spec)
    }
}

fn step(d: &mut Decoder, node: &Node, path: &str) -> R<Step> {
    if node.as_scalar() == Some("tick") {
        return Ok(Step::Tick);
    }
    let keys = ["compose", "add-snapshot", "publish", "advance", "set-clock", "tick", "update", "filter", "expect"];
    let m = d.map(node, path, &keys)?;
    let which = read::one_of(d, &m, &keys, "a step")?;
    let n = m.require(d, which)?;
    let p = m.path_of(which);
    Ok(match which {
        "compose" => {
            let (draft, components) = snapshot_draft_with(d, n, &p, component_source)?;
            Step::Compose { draft, components }
        }
        "add-snapshot" => Step::AddSnapshot(d.nonempty_string(n, &p)?.into()),
        "publish" => {
            let f = d.map(n, &p, &["snapshot", "channel", "author", "thread"])?;
            Step::Publish {
                snapshot: d.nonempty_string(f.require(d, "snapshot")?, &f.path_of("snapshot"))?,
                channel: d.nonempty_string(f.require(d, "channel")?, &f.path_of("channel"))?,
                author: d.nonempty_string(f.require(d, "author")?, &f.path_of("author"))?,
                thread: f
                    .get("thread")
                    .map(|n| d.u32(n, &f.path_of("thread")).map(MessageId::from))
                    .transpose()?,
            }
        }
        "advance" => Step::Advance(d.duration(n, &p)?),
        "set-clock" => Step::SetClock(d.datetime(n, &p)?),
        "tick" => Step::Tick,
        "update" => {
            let f = d.map(n, &p, &["snapshot", "author", "edits"])?;
            Step::Update {
                snapshot: d.nonempty_string(f.require(d, "snapshot")?, &f.path_of("snapshot"))?,
                author: d.nonempty_string(f.require(d, "author")?, &f.path_of("author"))?,
                edits: manual_edits(d, f.require(d, "edits")?, &f.path_of("edits"))?,
            }
        }
        "filter" => {
            let f = d.map(n, &p, &["message", "component", "viewer", "request"])?;
            Step::Filter {
                message: d.u32(f.require(d, "message")?, &f.path_of("message"))?.into(),
                component: d.nonempty_string(f.require(d, "component")?, &f.path_of("component"))?,
                viewer: d.nonempty_string(f.require(d, "viewer")?, &f.path_of("viewer"))?,
                request: filter_request(d, f.require(d, "request")?, &f.path_of("request"))?,
            }
        }
        _ => {
            let f = d.map(
                n,
                &p,
                &[
                    "snapshot",
                    "version",
                    "thread-replies",
                    "superseded",
                    "annotations",
                    "stale",
                    "tick-failures",
                    "caption-contains",
                ],
            )?;
            let count = |d: &Decoder, key: &str| {
                f.get(key)
                    .map(|n| d.u32(n, &f.path_of(key)).map(|v| v as usize))
                    .transpose()
            };
            Step::Expect(Expectation {
                snapshot: d.nonempty_string(f.require(d, "snapshot")?, &f.path_of("snapshot"))?,
                version: f.get("version").map(|n| d.u32(n, &f.path_of("version"))).transpose()?,
                thread_replies: count(d, "thread-replies")?,
                superseded: match f.get("superseded") {
                    Some(n) => d.list(n, &f.path_of("superseded"), |d, n, p| d.u32(n, p))?,
                    None => Vec::new(),
                },
                annotations: count(d, "annotations")?,
                stale: f.get("stale").map(|n| d.bool(n, &f.path_of("stale"))).transpose()?,
                tick_failures: count(d, "tick-failures")?,
                caption_contains: f
                    .get("caption-contains")
                    .map(|n| d.string(n, &f.path_of("caption-contains")))
                    .transpose()?,
            })
        }
    })
}

fn channel(d: &mut Decoder, node: &Node, path: &str) -> R<ChannelDef> {
    let m = d.map(node, path, &["id", "name", "members"])?;
    let id = d.nonempty_string(m.require(d, "id")?, &m.path_of("id"))?;
    Ok(ChannelDef {
        name: match m.get("name") {
            Some(n) => d.string(n, &m.path_of("name"))?,
            None => id.clone(),
        },
        members: match m.get("members") {
            Some(n) => d.strings(n, &m.path_of("members"))?,
            None => Vec::new(),
        },
        id,
    })
}

pub fn parse_script(text: &str) -> R<Script> {
    let node = parse_node(text)?;
    let mut d = Decoder::default();
    let d = &mut d;
    let m = d.map(&node, "", &["clock", "sources", "dashboards", "channels", "steps"])?;
    let mut sources = Vec::new();
    if let Some(n) = m.get("sources") {
        for (k, v) in d.open_map(n, "sources")? {
            sources.push((k.text.clone(), PathBuf::from(d.nonempty_string(v, &format!("sources.{}", k.text))?)));
        }
    }
    Ok(Script {
        clock: d.datetime(m.require(d, "clock")?, "clock")?,
        sources,
        dashboards: match m.get("dashboards") {
            Some(n) => d.strings(n, "dashboards")?.into_iter().map(PathBuf::from).collect(),
            None => Vec::new(),
        },
        channels: match m.get("channels") {
            Some(n) => d.list(n, "channels", channel)?,
            None => Vec::new(),
        },
        steps: d.list(m.require(d, "steps")?, "steps", step)?,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub index: usize,
    pub step: String,
    pub ok: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ScenarioReport {
    pub steps: Vec<StepOutcome>,
    pub passed: bool,
    pub elapsed_ms: u128,
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{file}: {error}")]
    Parse { file: PathBuf, error: ParseError },
}

fn read_file(path: &Path) -> Result<String, ScenarioError> {
    std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Runs a script file; relative paths in it resolve against its directory.
pub fn run_file(path: &Path) -> Result<(ScenarioReport, Workspace), ScenarioError> {
    let text = read_file(path)?;
    let script = parse_script(&text).map_err(|error| ScenarioError::Parse {
        file: path.to_path_buf(),
        error,
    })?;
    run(&script, path.parent().unwrap_or(Path::new(".")))
}

/// Runs every step, stopping at the first failure. Setup problems (unreadable or
/// invalid files) are errors; step failures are reported as outcomes.
pub fn run(script: &Script, base: &Path) -> Result<(ScenarioReport, Workspace), ScenarioError> {
    let started = Instant::now();
    let mut ws = Workspace::from_store(Default::default(), base.to_path_buf());
    for (id, path) in &script.sources {
        ws.add_source(
            id,
            SourceRef {
                path: path.clone(),
                schema: None,
            },
        );
    }
    for p in &script.dashboards {
        let file = base.join(p);
        let dash = parse_dashboard(&read_file(&file)?).map_err(|error| ScenarioError::Parse { file, error })?;
        ws.add_dashboard(dash);
    }
    for c in &script.channels {
        // Duplicate ids in the script keep the first definition.
        let _ = ws.add_channel(&c.id, &c.name, c.members.clone());
    }
    let clock = VirtualClock::new(script.clock);
    let mut runner = Runner {
        ws,
        clock,
        base: base.to_path_buf(),
        last_tick_failures: 0,
    };
    let mut steps = Vec::new();
    for (index, s) in script.steps.iter().enumerate() {
        let result = runner.step(s);
        let ok = result.is_ok();
        steps.push(StepOutcome {
            index,
            step: s.name().into(),
            ok,
            detail: result.unwrap_or_else(|e| e),
        });
        if !ok {
            break;
        }
    }
    let passed = steps.len() == script.steps.len() && steps.iter().all(|s| s.ok);
    let report = ScenarioReport {
        steps,
        passed,
        elapsed_ms: started.elapsed().as_millis(),
    };
    Ok((report, runner.ws))
}

struct Runner {
    ws: Workspace,
    clock: VirtualClock,
    base: PathBuf,
    last_tick_failures: usize,
}

impl Runner {
    fn step(&mut self, s: &Step) -> Result<String, String> {
        let clock = &self.clock;
        let ws = &mut self.ws;
        let err = |e: &dyn std::fmt::Display| e.to_string();
        match s {
            Step::Compose { draft, components } => {
                let mut draft = draft.clone();
                for c in components {
                    draft.components.push(match c {
                        ComponentSource::Spec(c) => c.clone(),
                        ComponentSource::FromPanel(r) => ws
                            .create_component(&r.dashboard, &r.panel, r.options.clone())
                            .map_err(|e| err(&e))?,
                    });
                }
                let s = ws.compose(draft, clock).map_err(|e| err(&e))?;
                Ok(format!("{} v{} fresh until {}", s.id, s.version, s.freshness))
            }
            Step::AddSnapshot(p) => {
                let text = std::fs::read_to_string(self.base.join(p)).map_err(|e| err(&e))?;
                let s = parse_snapshot(&text).map_err(|e| err(&e))?;
                let id = s.id.clone();
                ws.add_snapshot(s, clock).map_err(|e| err(&e))?;
                Ok(id)
            }
            Step::Publish {
                snapshot,
                channel,
                author,
                thread,
            } => {
                let id = ws.publish(snapshot, channel, *thread, author, clock).map_err(|e| err(&e))?;
                Ok(format!("message {id}"))
            }
            Step::Advance(d) => {
                let now = clock.now();
                let date = d.add_to(now.date()).ok_or("clock overflow")?;
                clock.set(date.and_time(now.time()));
                Ok(clock.now().to_string())
            }
            Step::SetClock(t) => {
                clock.set(*t);
                Ok(t.to_string())
            }
            Step::Tick => {
                let out = ws.tick(clock);
                self.last_tick_failures = out.report.failures.len();
                Ok(format!(
                    "{} update(s), {} post(s), {} failure(s)",
                    out.report.updates.len(),
                    out.posted.len(),
                    out.report.failures.len()
                ))
            }
            Step::Update { snapshot, author, edits } => {
                let (v, posted) = ws.update_manual(snapshot, edits.clone(), author, clock).map_err(|e| err(&e))?;
                Ok(format!("v{v}, {} post(s)", posted.len()))
            }
            Step::Filter {
                message,
                component,
                viewer,
                request,
            } => {
                let state = ws
                    .apply_filter(*message, component, viewer, request.clone())
                    .map_err(|e| err(&e))?;
                Ok(format!("{} active filter(s)", state.active.len()))
            }
            Step::Expect(e) => self.expect(e),
        }
    }

    fn expect(&self, e: &Expectation) -> Result<String, String> {
        let ws = &self.ws;
        let s = ws.snapshot(&e.snapshot, None).map_err(|x| x.to_string())?;
        let mut checked = Vec::new();
        let mut check = |what: &str, ok: bool, got: String| {
            if ok {
                checked.push(what.to_string());
                Ok(())
            } else {
                Err(format!("{what}: got {got}"))
            }
        };
        if let Some(v) = e.version {
            check("version", s.version == v, s.version.to_string())?;
        }
        let platform = &ws.store.platform;
        let posts: Vec<_> = platform
            .messages
            .iter()
            .filter(|m| m.snapshot_ref().is_some_and(|(id, _, _)| id == e.snapshot))
            .collect();
        if let Some(n) = e.thread_replies {
            let got = posts
                .first()
                .map_or(0, |root| posts.iter().filter(|m| m.thread_root == Some(root.thread())).count());
            check("thread-replies", got == n, got.to_string())?;
        }
        for v in &e.superseded {
            let of_v: Vec<_> = posts.iter().filter(|m| m.snapshot_ref().is_some_and(|(_, x, _)| x == *v)).collect();
            let ok = !of_v.is_empty() && of_v.iter().all(|m| m.superseded_by.is_some());
            check(&format!("superseded v{v}"), ok, format!("{} post(s), not all superseded", of_v.len()))?;
        }
        if let Some(n) = e.annotations {
            let got: usize = s.components.iter().map(|c| c.annotations.len()).sum();
            check("annotations", got == n, got.to_string())?;
        }
        if let Some(stale) = e.stale {
            let got = s.is_stale(self.clock.today());
            check("stale", got == stale, got.to_string())?;
        }
        if let Some(n) = e.tick_failures {
            check("tick-failures", self.last_tick_failures == n, self.last_tick_failures.to_string())?;
        }
        if let Some(text) = &e.caption_contains {
            let render = ws.render(&e.snapshot, None, &self.clock).map_err(|x| x.to_string())?;
            let found = render
                .layout
                .components
                .iter()
                .any(|c| c.node.captions().iter().any(|cap| cap.contains(text.as_str())));
            check("caption-contains", found, "no matching caption".into())?;
        }
        Ok(checked.join(", "))
    }
}
