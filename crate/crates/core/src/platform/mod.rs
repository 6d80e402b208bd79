//! A small threaded chat platform that hosts snapshot renders and keeps each viewer's
//! interactive filters private to them.

use std::collections::BTreeMap;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::data::DataSourceRegistry;
use crate::lifecycle::{materialize_component, Clock, FreshnessBadge, SnapshotRender, SnapshotStore};
use crate::model::{DataFilter, InteractiveFilter};
use crate::template::Catalog;

pub type MessageId = u64;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlatformError {
    #[error("no channel {0:?}")]
    UnknownChannel(String),
    #[error("channel {0:?} already exists")]
    DuplicateChannel(String),
    #[error("no message {0}")]
    UnknownMessage(MessageId),
    #[error("message {0} is not a thread in this channel")]
    UnknownThread(MessageId),
    #[error("message {0} does not carry a snapshot")]
    NotASnapshot(MessageId),
    #[error("no stored render for snapshot {snapshot_id:?} version {version}")]
    UnknownRender { snapshot_id: String, version: u32 },
    #[error("snapshot has no component {0:?}")]
    UnknownComponent(String),
    #[error("component {component:?} declares no {filter}")]
    UndeclaredFilter { component: String, filter: String },
    #[error("{0}")]
    ValueNotAllowed(String),
}

impl PlatformError {
    pub fn code(&self) -> &'static str {
        match self {
            PlatformError::UnknownChannel(_) => "UNKNOWN_CHANNEL",
            PlatformError::DuplicateChannel(_) => "DUPLICATE_CHANNEL",
            PlatformError::UnknownMessage(_) => "UNKNOWN_MESSAGE",
            PlatformError::UnknownThread(_) => "UNKNOWN_THREAD",
            PlatformError::NotASnapshot(_) => "NOT_A_SNAPSHOT",
            PlatformError::UnknownRender { .. } => "UNKNOWN_RENDER",
            PlatformError::UnknownComponent(_) => "UNKNOWN_COMPONENT",
            PlatformError::UndeclaredFilter { .. } => "UNDECLARED_FILTER",
            PlatformError::ValueNotAllowed(_) => "FILTER_VALUE_NOT_ALLOWED",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Channel {
    pub id: String,
    pub name: String,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", rename_all_fields = "kebab-case")]
pub enum MessageBody {
    Text {
        text: String,
    },
    /// Points at `renders[render]` of the snapshot's store entry.
    Snapshot {
        snapshot_id: String,
        version: u32,
        render: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Message {
    pub id: MessageId,
    pub channel: String,
    /// Root of the thread this message replies in; `None` for a root message.
    pub thread_root: Option<MessageId>,
    pub author: String,
    pub timestamp: NaiveDateTime,
    pub body: MessageBody,
    #[serde(default)]
    pub reactions: BTreeMap<String, u32>,
    /// Set when a later version of the same snapshot was posted in this thread.
    #[serde(default)]
    pub superseded_by: Option<MessageId>,
}

impl Message {
    pub fn snapshot_ref(&self) -> Option<(&str, u32, usize)> {
        match &self.body {
            MessageBody::Snapshot {
                snapshot_id,
                version,
                render,
            } => Some((snapshot_id, *version, *render)),
            MessageBody::Text { .. } => None,
        }
    }

    pub fn thread(&self) -> MessageId {
        self.thread_root.unwrap_or(self.id)
    }
}

/// What a viewer asks for on one component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum FilterRequest {
    Dropdown { column: String, value: String },
    Slider { column: String, min: f64, max: f64 },
    Macro { name: String },
    /// Drops one active filter (by key, e.g. `dropdown:Category`), or all when `None`.
    Clear { key: Option<String> },
}

/// A filter a viewer has switched on, with the data filters it stands for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveFilter {
    pub key: String,
    pub filters: Vec<DataFilter>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ViewerState {
    pub viewer: String,
    pub message: MessageId,
    pub component: String,
    pub active: Vec<ActiveFilter>,
}

impl ViewerState {
    pub fn data_filters(&self) -> Vec<DataFilter> {
        self.active.iter().flat_map(|a| a.filters.iter().cloned()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Platform {
    pub channels: BTreeMap<String, Channel>,
    /// Append-only, in posting order.
    pub messages: Vec<Message>,
    /// Keyed by `viewer/message/component`.
    pub viewer_states: BTreeMap<String, ViewerState>,
}

fn state_key(viewer: &str, message: MessageId, component: &str) -> String {
    format!("{viewer}/{message}/{component}")
}

/// A message as one viewer sees it at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct MessageView {
    pub message: Message,
    pub render: Option<SnapshotRender>,
    /// Components showing this viewer's private filters.
    pub filtered_components: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct DisseminationEntry {
    pub channel: String,
    pub message: MessageId,
    pub thread: MessageId,
    pub version: u32,
    pub posted_at: NaiveDateTime,
    pub superseded: bool,
}

impl Platform {
    pub fn add_channel(&mut self, id: &str, name: &str, members: Vec<String>) -> Result<&Channel, PlatformError> {
        if self.channels.contains_key(id) {
            return Err(PlatformError::DuplicateChannel(id.into()));
        }
        let ch = Channel {
            id: id.into(),
            name: name.into(),
            members,
        };
        Ok(self.channels.entry(id.into()).or_insert(ch))
    }

    pub fn message(&self, id: MessageId) -> Result<&Message, PlatformError> {
        // Ids are assigned in order starting at 1.
        self.messages
            .get((id as usize).wrapping_sub(1))
            .filter(|m| m.id == id)
            .or_else(|| self.messages.iter().find(|m| m.id == id))
            .ok_or(PlatformError::UnknownMessage(id))
    }

    fn next_id(&self) -> MessageId {
        self.messages.last().map_or(1, |m| m.id + 1)
    }

    /// Appends a message, as a reply when `thread` is given.
    pub fn post(
        &mut self,
        channel: &str,
        thread: Option<MessageId>,
        author: &str,
        body: MessageBody,
        clock: &dyn Clock,
    ) -> Result<&Message, PlatformError> {
        if !self.channels.contains_key(channel) {
            return Err(PlatformError::UnknownChannel(channel.into()));
        }
        let thread_root = match thread {
            Some(t) => {
                let root = self.message(t)?;
                if root.channel != channel {
                    return Err(PlatformError::UnknownThread(t));
                }
                Some(root.thread())
            }
            None => None,
        };
        let id = self.next_id();
        self.messages.push(Message {
            id,
            channel: channel.into(),
            thread_root,
            author: author.into(),
            timestamp: clock.now(),
            body,
            reactions: BTreeMap::new(),
            superseded_by: None,
        });
        Ok(self.messages.last().expect("just pushed"))
    }

    /// Posts the latest stored render of a snapshot version. Earlier versions of the
    /// same snapshot in that thread are marked superseded by the new message.
    pub fn post_snapshot(
        &mut self,
        snapshots: &SnapshotStore,
        channel: &str,
        thread: Option<MessageId>,
        snapshot_id: &str,
        version: u32,
        author: &str,
        clock: &dyn Clock,
    ) -> Result<MessageId, PlatformError> {
        let unknown = || PlatformError::UnknownRender {
            snapshot_id: snapshot_id.into(),
            version,
        };
        let entry = snapshots.get(snapshot_id).ok_or_else(unknown)?;
        let render = entry.renders.iter().rposition(|r| r.version == version).ok_or_else(unknown)?;
        let body = MessageBody::Snapshot {
            snapshot_id: snapshot_id.into(),
            version,
            render,
        };
        let posted = self.post(channel, thread, author, body, clock)?;
        let (id, tid) = (posted.id, posted.thread());
        for m in &mut self.messages {
            if m.id != id && m.thread() == tid && m.superseded_by.is_none() {
                if let Some((sid, v, _)) = m.snapshot_ref() {
                    if sid == snapshot_id && v < version {
                        m.superseded_by = Some(id);
                    }
                }
            }
        }
        Ok(id)
    }

    /// Threads (by root id) where `snapshot_id` has been posted, in posting order.
    pub fn threads_of(&self, snapshot_id: &str) -> Vec<(String, MessageId)> {
        let mut out: Vec<(String, MessageId)> = Vec::new();
        for m in &self.messages {
            if m.snapshot_ref().is_some_and(|(s, _, _)| s == snapshot_id) {
                let t = (m.channel.clone(), m.thread());
                if !out.contains(&t) {
                    out.push(t);
                }
            }
        }
        out
    }

    pub fn thread_messages(&self, root: MessageId) -> Vec<&Message> {
        self.messages.iter().filter(|m| m.thread() == root).collect()
    }

    pub fn react(&mut self, message: MessageId, reaction: &str) -> Result<u32, PlatformError> {
        self.message(message)?;
        let m = self.messages.iter_mut().find(|m| m.id == message).expect("checked above");
        let n = m.reactions.entry(reaction.into()).or_insert(0);
        *n += 1;
        Ok(*n)
    }

    /// Switches a declared interactive filter on (or off) for one viewer only.
    pub fn apply_interactive_filter(
        &mut self,
        snapshots: &SnapshotStore,
        message: MessageId,
        component: &str,
        viewer: &str,
        request: FilterRequest,
    ) -> Result<ViewerState, PlatformError> {
        let m = self.message(message)?;
        let (sid, version, _) = m.snapshot_ref().ok_or(PlatformError::NotASnapshot(message))?;
        let spec = snapshots
            .get(sid)
            .and_then(|e| e.version(version))
            .ok_or_else(|| PlatformError::UnknownRender {
                snapshot_id: sid.into(),
                version,
            })?;
        let c = spec
            .component(component)
            .ok_or_else(|| PlatformError::UnknownComponent(component.into()))?;
        let undeclared = |filter: String| PlatformError::UndeclaredFilter {
            component: component.into(),
            filter,
        };
        let activated = match &request {
            FilterRequest::Dropdown { column, value } => {
                let values = c
                    .interactive_filters
                    .iter()
                    .find_map(|f| match f {
                        InteractiveFilter::Dropdown { column: col, values } if col == column => Some(values),
                        _ => None,
                    })
                    .ok_or_else(|| undeclared(format!("dropdown on {column:?}")))?;
                if !values.contains(value) {
                    return Err(PlatformError::ValueNotAllowed(format!(
                        "{value:?} is not one of the dropdown values for {column:?}"
                    )));
                }
                Some(ActiveFilter {
                    key: format!("dropdown:{column}"),
                    filters: vec![DataFilter::equals(column, value)],
                })
            }
            FilterRequest::Slider { column, min, max } => {
                let (lo, hi) = c
                    .interactive_filters
                    .iter()
                    .find_map(|f| match f {
                        InteractiveFilter::Slider { column: col, min, max } if col == column => Some((*min, *max)),
                        _ => None,
                    })
                    .ok_or_else(|| undeclared(format!("slider on {column:?}")))?;
                if !(lo <= *min && min <= max && *max <= hi) {
                    return Err(PlatformError::ValueNotAllowed(format!(
                        "slider range {min}..{max} is outside {lo}..{hi} for {column:?}"
                    )));
                }
                Some(ActiveFilter {
                    key: format!("slider:{column}"),
                    filters: vec![DataFilter::range(column, *min, *max)],
                })
            }
            FilterRequest::Macro { name } => {
                let filters = c.interactive_macro(name).ok_or_else(|| undeclared(format!("macro {name:?}")))?;
                Some(ActiveFilter {
                    key: format!("macro:{name}"),
                    filters: filters.to_vec(),
                })
            }
            FilterRequest::Clear { .. } => None,
        };
        let key = state_key(viewer, message, component);
        let state = self.viewer_states.entry(key.clone()).or_insert_with(|| ViewerState {
            viewer: viewer.into(),
            message,
            component: component.into(),
            active: Vec::new(),
        });
        match (activated, request) {
            (Some(a), _) => {
                state.active.retain(|x| x.key != a.key);
                state.active.push(a);
            }
            (None, FilterRequest::Clear { key: Some(k) }) => state.active.retain(|x| x.key != k),
            (None, _) => state.active.clear(),
        }
        let out = state.clone();
        if out.active.is_empty() {
            self.viewer_states.remove(&key);
        }
        Ok(out)
    }

    pub fn viewer_state(&self, viewer: &str, message: MessageId, component: &str) -> Option<&ViewerState> {
        self.viewer_states.get(&state_key(viewer, message, component))
    }

    /// The message as `viewer` sees it now: staleness against `clock`, and components
    /// re-rendered under this viewer's filters. Nothing stored changes.
    pub fn view_message(
        &self,
        snapshots: &SnapshotStore,
        registry: &DataSourceRegistry,
        catalog: &Catalog,
        message: MessageId,
        viewer: &str,
        clock: &dyn Clock,
    ) -> Result<MessageView, PlatformError> {
        let m = self.message(message)?;
        let Some((sid, version, render_idx)) = m.snapshot_ref() else {
            return Ok(MessageView {
                message: m.clone(),
                render: None,
                filtered_components: Vec::new(),
            });
        };
        let unknown = || PlatformError::UnknownRender {
            snapshot_id: sid.into(),
            version,
        };
        let entry = snapshots.get(sid).ok_or_else(unknown)?;
        let spec = entry.version(version).ok_or_else(unknown)?;
        let mut render = entry.renders.get(render_idx).cloned().ok_or_else(unknown)?;
        render.freshness_badge = FreshnessBadge::at(spec.freshness, clock.today());
        let mut filtered = Vec::new();
        for c in &spec.components {
            let Some(state) = self.viewer_state(viewer, message, &c.id) else { continue };
            let extra = state.data_filters();
            let rerendered = materialize_component(c, registry, catalog, &extra, false);
            if let Some((_, block)) = render.transparency_block.iter_mut().find(|(id, _)| *id == c.id) {
                *block = rerendered.transparency.clone();
            }
            if let Some(slot) = render.layout.components.iter_mut().find(|r| r.component_id == c.id) {
                *slot = rerendered;
            }
            filtered.push(c.id.clone());
        }
        Ok(MessageView {
            message: m.clone(),
            render: Some(render),
            filtered_components: filtered,
        })
    }

    /// Where each snapshot has been posted, by snapshot id.
    pub fn dissemination_report(&self) -> BTreeMap<String, Vec<DisseminationEntry>> {
        let mut out: BTreeMap<String, Vec<DisseminationEntry>> = BTreeMap::new();
        for m in &self.messages {
            if let Some((sid, version, _)) = m.snapshot_ref() {
                out.entry(sid.into()).or_default().push(DisseminationEntry {
                    channel: m.channel.clone(),
                    message: m.id,
                    thread: m.thread(),
                    version,
                    posted_at: m.timestamp,
                    superseded: m.superseded_by.is_some(),
                });
            }
        }
        out
    }
}
