use std::collections::BTreeMap;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use super::{materialize, update_at, Clock, SnapshotRender, UpdateMode};
use crate::data::DataSourceRegistry;
use crate::model::SnapshotSpec;
use crate::template::Catalog;

/// Every version of one snapshot with its render. Versions are never removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SnapshotEntry {
    #[serde(with = "crate::spec_io::surface::snapshots")]
    pub versions: Vec<SnapshotSpec>,
    pub renders: Vec<SnapshotRender>,
    /// When the latest version was due (or first published).
    pub last_published: NaiveDateTime,
}

impl SnapshotEntry {
    pub fn current(&self) -> &SnapshotSpec {
        self.versions.last().expect("entries hold at least one version")
    }

    pub fn version(&self, v: u32) -> Option<&SnapshotSpec> {
        self.versions.iter().find(|s| s.version == v)
    }

    pub fn render(&self, v: u32) -> Option<&SnapshotRender> {
        self.renders.iter().rev().find(|r| r.version == v)
    }

    /// The instant the next automatic update is due, if the snapshot recurs and the
    /// recurrence has not run out.
    pub fn next_due(&self) -> Option<NaiveDateTime> {
        let rule = self.current().update_policy.recurrence()?;
        let date = rule.period.add_to(self.last_published.date())?;
        (date <= rule.until).then(|| date.and_time(rule.publish_time))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SnapshotStore {
    pub snapshots: BTreeMap<String, SnapshotEntry>,
}

impl SnapshotStore {
    pub fn get(&self, id: &str) -> Option<&SnapshotEntry> {
        self.snapshots.get(id)
    }

    pub fn current(&self, id: &str) -> Option<&SnapshotSpec> {
        self.get(id).map(SnapshotEntry::current)
    }

    /// Adds a new snapshot, or a new version of an existing one.
    pub fn record(&mut self, spec: SnapshotSpec, render: SnapshotRender, published: NaiveDateTime) {
        match self.snapshots.get_mut(&spec.id) {
            Some(entry) => {
                entry.versions.push(spec);
                entry.renders.push(render);
                entry.last_published = published;
            }
            None => {
                self.snapshots.insert(
                    spec.id.clone(),
                    SnapshotEntry {
                        versions: vec![spec],
                        renders: vec![render],
                        last_published: published,
                    },
                );
            }
        }
    }

    /// Appends another render of an existing version (e.g. a viewer-triggered refresh).
    /// [`SnapshotEntry::render`] returns the latest one.
    pub fn push_render(&mut self, render: SnapshotRender) {
        if let Some(e) = self.snapshots.get_mut(&render.snapshot_id) {
            e.renders.push(render);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct TickUpdate {
    pub snapshot_id: String,
    pub version: u32,
    pub render: SnapshotRender,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct TickFailure {
    pub snapshot_id: String,
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TickReport {
    pub updates: Vec<TickUpdate>,
    pub failures: Vec<TickFailure>,
}

/// Updates every recurring snapshot whose next due instant has passed, at most once per
/// snapshot. A snapshot whose sources cannot be loaded is reported and retried next tick.
pub fn scheduler_tick(
    store: &mut SnapshotStore,
    registry: &DataSourceRegistry,
    catalog: &Catalog,
    clock: &dyn Clock,
) -> TickReport {
    let now = clock.now();
    let mut report = TickReport::default();
    let due: Vec<(String, NaiveDateTime)> = store
        .snapshots
        .iter()
        .filter_map(|(id, e)| e.next_due().filter(|d| *d <= now).map(|d| (id.clone(), d)))
        .collect();
    for (id, due_at) in due {
        let current = store.snapshots[&id].current().clone();
        let fail = |e: &dyn std::fmt::Display, code: &str| TickFailure {
            snapshot_id: id.clone(),
            code: code.to_string(),
            message: e.to_string(),
        };
        if let Some(err) = current.components.iter().find_map(|c| registry.resolve(&c.data_source).err()) {
            report.failures.push(fail(&err, "DATA_SOURCE"));
            continue;
        }
        match update_at(&current, &UpdateMode::Auto, due_at.date(), clock) {
            Ok(next) => {
                let render = materialize(&next, registry, catalog, clock);
                report.updates.push(TickUpdate {
                    snapshot_id: id.clone(),
                    version: next.version,
                    render: render.clone(),
                });
                store.record(next, render, due_at);
            }
            Err(e) => report.failures.push(fail(&e, e.code())),
        }
    }
    report
}
