//! Everything a running service holds: the store, the data sources it names and the
//! template catalog. The CLI and HTTP layers call into this and nothing else.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{apply_filters, DataError, DataSourceRegistry};
use crate::lifecycle::{
    compose_snapshot, create_component, materialize, scheduler_tick, update_snapshot, Clock, ComponentOptions,
    FreshnessBadge, LifecycleError, ManualEdits, SnapshotDraft, SnapshotRender, TickReport, UpdateMode,
};
use crate::model::{validate_snapshot, ComponentSpec, Dashboard, DimensionKind, SnapshotSpec, UpdatePolicy};
use crate::platform::{
    DisseminationEntry, FilterRequest, MessageBody, MessageId, MessageView, PlatformError, ViewerState,
};
use crate::store::{load_store, save_store, SourceRef, Store, StoreError};
use crate::template::{applicable_for_selection, Applicable, Catalog};

/// Broad class of a failure, for mapping onto HTTP statuses and exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    NotFound,
    Invalid,
    Conflict,
}

#[derive(Debug, thiserror::Error)]
pub enum WorkspaceError {
    #[error("no {kind} {id:?}")]
    NotFound { kind: &'static str, id: String },
    #[error("{0}")]
    Conflict(String),
    #[error(transparent)]
    Lifecycle(#[from] LifecycleError),
    #[error(transparent)]
    Platform(#[from] PlatformError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl WorkspaceError {
    pub fn class(&self) -> ErrorClass {
        use ErrorClass::*;
        match self {
            WorkspaceError::NotFound { .. } => NotFound,
            WorkspaceError::Conflict(_) => Conflict,
            WorkspaceError::Lifecycle(e) => match e {
                LifecycleError::UnknownSnapshot(_) | LifecycleError::UnknownComponent(_) => NotFound,
                LifecycleError::RecurrenceExpired { .. } | LifecycleError::NotRecurring(_) => Conflict,
                _ => Invalid,
            },
            WorkspaceError::Platform(e) => match e {
                PlatformError::UnknownChannel(_)
                | PlatformError::UnknownMessage(_)
                | PlatformError::UnknownRender { .. }
                | PlatformError::UnknownComponent(_) => NotFound,
                PlatformError::DuplicateChannel(_) => Conflict,
                _ => Invalid,
            },
            WorkspaceError::Data(DataError::UnknownSource(_)) => NotFound,
            WorkspaceError::Data(_) | WorkspaceError::Store(_) => Invalid,
        }
    }

    pub fn code(&self) -> String {
        match self {
            WorkspaceError::NotFound { kind, .. } => format!("UNKNOWN_{}", kind.to_uppercase()),
            WorkspaceError::Conflict(_) => "CONFLICT".into(),
            WorkspaceError::Lifecycle(e) => e.code().into(),
            WorkspaceError::Platform(e) => e.code().into(),
            WorkspaceError::Data(DataError::UnknownSource(_)) => "UNKNOWN_SOURCE".into(),
            WorkspaceError::Data(_) => "DATA_SOURCE".into(),
            WorkspaceError::Store(e) => e.code().into(),
        }
    }
}

pub type Result<T, E = WorkspaceError> = std::result::Result<T, E>;

fn not_found(kind: &'static str, id: &str) -> WorkspaceError {
    WorkspaceError::NotFound { kind, id: id.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct PanelSummary {
    pub dashboard: String,
    pub panel: String,
    pub worksheet: String,
    pub data_source: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TickOutcome {
    pub report: TickReport,
    pub posted: Vec<MessageId>,
}

pub struct Workspace {
    pub store: Store,
    pub registry: DataSourceRegistry,
    pub catalog: Catalog,
    base_dir: PathBuf,
}

impl Default for Workspace {
    fn default() -> Self {
        Workspace::from_store(Store::default(), PathBuf::from("."))
    }
}

impl Workspace {
    /// Relative source paths in `store` resolve against `base_dir`.
    pub fn from_store(store: Store, base_dir: PathBuf) -> Self {
        let mut ws = Workspace {
            store,
            registry: DataSourceRegistry::new(),
            catalog: Catalog::builtin(),
            base_dir,
        };
        let sources: Vec<(String, SourceRef)> = ws.store.sources.clone().into_iter().collect();
        for (id, src) in sources {
            ws.register(&id, &src);
        }
        ws
    }

    /// Loads a store file; a missing file gives an empty workspace.
    pub fn open(path: &Path) -> Result<Self> {
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let store = if path.exists() { load_store(path)? } else { Store::default() };
        Ok(Workspace::from_store(store, base))
    }

    /// Saves the store. Relative source paths are rewritten when `path` sits outside the
    /// directory they resolve against, so the file still opens from its own location.
    pub fn save(&self, path: &Path) -> Result<()> {
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let relative = self
            .store
            .sources
            .values()
            .any(|s| s.path.is_relative() || s.schema.as_ref().is_some_and(|p| p.is_relative()));
        if !relative || same_dir(&dir, &self.base_dir) {
            return Ok(save_store(&self.store, path)?);
        }
        let mut store = self.store.clone();
        for src in store.sources.values_mut() {
            src.path = self.absolute(&src.path);
            if let Some(p) = &mut src.schema {
                *p = self.absolute(p);
            }
        }
        Ok(save_store(&store, path)?)
    }

    fn absolute(&self, p: &Path) -> PathBuf {
        let p = self.resolve_path(p);
        std::path::absolute(&p).unwrap_or(p)
    }

    fn resolve_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn register(&mut self, id: &str, src: &SourceRef) {
        let schema = match &src.schema {
            Some(p) => std::fs::read_to_string(self.resolve_path(p))
                .ok()
                .and_then(|t| crate::data::parse_declared_schema(&t).ok()),
            None => None,
        };
        let path = self.resolve_path(&src.path);
        self.registry.insert_csv(id, path, schema);
    }

    pub fn add_source(&mut self, id: &str, src: SourceRef) {
        self.register(id, &src);
        self.store.sources.insert(id.into(), src);
    }

    pub fn add_dashboard(&mut self, d: Dashboard) {
        self.store.dashboards.insert(d.id.clone(), d);
    }

    pub fn panels(&self) -> Vec<PanelSummary> {
        self.store
            .dashboards
            .values()
            .flat_map(|d| {
                d.panels.iter().map(|p| PanelSummary {
                    dashboard: d.id.clone(),
                    panel: p.panel_id.clone(),
                    worksheet: p.worksheet.clone(),
                    data_source: p.data_source.clone(),
                })
            })
            .collect()
    }

    fn selection(&self, dashboard: &str, panel: &str) -> Result<&crate::model::DashboardSelection> {
        self.store
            .dashboards
            .get(dashboard)
            .ok_or_else(|| not_found("dashboard", dashboard))?
            .panel(panel)
            .ok_or_else(|| not_found("panel", panel))
    }

    pub fn create_component(&self, dashboard: &str, panel: &str, opts: ComponentOptions) -> Result<ComponentSpec> {
        let sel = self.selection(dashboard, panel)?;
        Ok(create_component(sel, opts, &self.catalog)?)
    }

    /// Templates that fit the panel, with category counts taken from its filtered data.
    pub fn applicable_templates(&self, dashboard: &str, panel: &str) -> Result<Vec<Applicable>> {
        let sel = self.selection(dashboard, panel)?;
        let categories = match sel.dimensions.iter().find(|d| d.kind == DimensionKind::Nominal) {
            Some(dim) => {
                let t = apply_filters(&*self.registry.resolve(&sel.data_source)?, &sel.data_filters)?;
                let idx = t.column_index(&dim.source_column)?;
                let set: BTreeSet<String> = t.rows().iter().filter_map(|r| r[idx].as_ref()).map(|v| v.to_string()).collect();
                Some(set.len())
            }
            None => None,
        };
        Ok(applicable_for_selection(&self.catalog, sel, categories))
    }

    /// Checks `s` against its data sources and records it with a fresh render.
    pub fn add_snapshot(&mut self, s: SnapshotSpec, clock: &dyn Clock) -> Result<SnapshotRender> {
        if self.store.snapshots.get(&s.id).is_some() {
            return Err(WorkspaceError::Conflict(format!("snapshot {:?} already exists", s.id)));
        }
        let report = validate_snapshot(&s, &self.registry, &self.catalog);
        if !report.is_empty() {
            return Err(LifecycleError::Invalid(report).into());
        }
        let render = materialize(&s, &self.registry, &self.catalog, clock);
        let published = s.created_at;
        self.store.snapshots.record(s, render.clone(), published);
        Ok(render)
    }

    pub fn compose(&mut self, draft: SnapshotDraft, clock: &dyn Clock) -> Result<SnapshotSpec> {
        let s = compose_snapshot(draft, clock)?;
        self.add_snapshot(s.clone(), clock)?;
        Ok(s)
    }

    pub fn snapshot(&self, id: &str, version: Option<u32>) -> Result<&SnapshotSpec> {
        let e = self.store.snapshots.get(id).ok_or_else(|| not_found("snapshot", id))?;
        match version {
            None => Ok(e.current()),
            Some(v) => e.version(v).ok_or_else(|| not_found("version", &v.to_string())),
        }
    }

    /// The stored render of a version, with the freshness badge as of `clock`.
    pub fn render(&self, id: &str, version: Option<u32>, clock: &dyn Clock) -> Result<SnapshotRender> {
        let s = self.snapshot(id, version)?;
        let mut r = self.store.snapshots.get(id).and_then(|e| e.render(s.version)).cloned().ok_or_else(|| not_found("render", id))?;
        r.freshness_badge = FreshnessBadge::at(s.freshness, clock.today());
        Ok(r)
    }

    pub fn add_channel(&mut self, id: &str, name: &str, members: Vec<String>) -> Result<()> {
        self.store.platform.add_channel(id, name, members)?;
        Ok(())
    }

    /// Posts the current version to a channel; `thread` makes it a reply.
    pub fn publish(
        &mut self,
        snapshot: &str,
        channel: &str,
        thread: Option<MessageId>,
        author: &str,
        clock: &dyn Clock,
    ) -> Result<MessageId> {
        let version = self.snapshot(snapshot, None)?.version;
        Ok(self
            .store
            .platform
            .post_snapshot(&self.store.snapshots, channel, thread, snapshot, version, author, clock)?)
    }

    /// Replies with `version` in every thread where the snapshot was posted.
    fn post_to_threads(&mut self, snapshot: &str, version: u32, author: &str, clock: &dyn Clock) -> Result<Vec<MessageId>> {
        let mut posted = Vec::new();
        for (channel, root) in self.store.platform.threads_of(snapshot) {
            posted.push(self.store.platform.post_snapshot(
                &self.store.snapshots,
                &channel,
                Some(root),
                snapshot,
                version,
                author,
                clock,
            )?);
        }
        Ok(posted)
    }

    /// Runs due automatic updates and posts each new version into its threads.
    pub fn tick(&mut self, clock: &dyn Clock) -> TickOutcome {
        let report = scheduler_tick(&mut self.store.snapshots, &self.registry, &self.catalog, clock);
        let mut posted = Vec::new();
        for u in &report.updates {
            let author = self.store.snapshots.current(&u.snapshot_id).map(|s| s.author.clone()).unwrap_or_default();
            // Channels and threads all exist by construction, so posting cannot fail here.
            if let Ok(ids) = self.post_to_threads(&u.snapshot_id, u.version, &author, clock) {
                posted.extend(ids);
            }
        }
        TickOutcome { report, posted }
    }

    /// An author's manual update. The recurrence schedule, if any, keeps its anchor.
    pub fn update_manual(
        &mut self,
        snapshot: &str,
        edits: ManualEdits,
        author: &str,
        clock: &dyn Clock,
    ) -> Result<(u32, Vec<MessageId>)> {
        let entry = self.store.snapshots.get(snapshot).ok_or_else(|| not_found("snapshot", snapshot))?;
        let anchor = entry.last_published;
        let next = update_snapshot(entry.current(), &UpdateMode::Manual(edits), clock)?;
        let version = next.version;
        let render = materialize(&next, &self.registry, &self.catalog, clock);
        self.store.snapshots.record(next, render, anchor);
        let posted = self.post_to_threads(snapshot, version, author, clock)?;
        Ok((version, posted))
    }

    /// A viewer asks for the snapshot to be recomputed over current data. Only allowed
    /// for snapshots whose policy lets viewers update; the version number is kept.
    pub fn refresh_for_viewer(&mut self, message: MessageId, viewer: &str, clock: &dyn Clock) -> Result<MessageId> {
        let m = self.store.platform.message(message)?;
        let (sid, _, _) = m.snapshot_ref().ok_or(PlatformError::NotASnapshot(message))?;
        let (sid, channel, root) = (sid.to_string(), m.channel.clone(), m.thread());
        let s = self.snapshot(&sid, None)?;
        if s.update_policy != UpdatePolicy::ManualViewer {
            return Err(WorkspaceError::Conflict(format!("snapshot {sid:?} cannot be updated by viewers")));
        }
        let render = materialize(s, &self.registry, &self.catalog, clock);
        let render_idx = self.store.snapshots.get(&sid).map_or(0, |e| e.renders.len());
        let version = render.version;
        self.store.snapshots.push_render(render);
        let body = MessageBody::Snapshot {
            snapshot_id: sid,
            version,
            render: render_idx,
        };
        Ok(self.store.platform.post(&channel, Some(root), viewer, body, clock)?.id)
    }

    pub fn view(&self, message: MessageId, viewer: &str, clock: &dyn Clock) -> Result<MessageView> {
        Ok(self
            .store
            .platform
            .view_message(&self.store.snapshots, &self.registry, &self.catalog, message, viewer, clock)?)
    }

    pub fn apply_filter(
        &mut self,
        message: MessageId,
        component: &str,
        viewer: &str,
        request: FilterRequest,
    ) -> Result<ViewerState> {
        Ok(self
            .store
            .platform
            .apply_interactive_filter(&self.store.snapshots, message, component, viewer, request)?)
    }

    pub fn dissemination(&self, snapshot: Option<&str>) -> Result<BTreeMap<String, Vec<DisseminationEntry>>> {
        let mut report = self.store.platform.dissemination_report();
        match snapshot {
            None => Ok(report),
            Some(id) => {
                self.snapshot(id, None)?;
                let entries = report.remove(id).unwrap_or_default();
                Ok(BTreeMap::from([(id.to_string(), entries)]))
            }
        }
    }
}

#[cfg(test)]
mod tests;

fn same_dir(a: &Path, b: &Path) -> bool {
    let canon = |p: &Path| {
        let p = if p.as_os_str().is_empty() { Path::new(".") } else { p };
        p.canonicalize().ok()
    };
    match (canon(a), canon(b)) {
        (Some(a), Some(b)) => a == b,
        _ => a == b,
    }
}
