//! Building components from selections, composing snapshots, freshness, updates and
//! materialization.

mod clock;
mod materialize;
mod store;

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::model::{
    validate_component_structure, validate_structure, Annotation, Appearance, ComponentSpec, Completeness, Curation,
    DashboardSelection, DataFilter, DimensionKind, Duration, InteractiveFilter, Predicate, SnapshotSpec, TemplateBinding,
    TimeFrame, UpdatePolicy, ValidationReport,
};
use crate::template::{mediate, Catalog, TemplateError};

pub use clock::{Clock, FixedClock, SystemClock, VirtualClock};
pub use materialize::{
    materialize, materialize_component, render_component_data, CompletenessBadge, ComponentRender, FreshnessBadge,
    SnapshotLayout, SnapshotRender, TransparencyBlock,
};
pub use store::{scheduler_tick, SnapshotEntry, SnapshotStore, TickFailure, TickReport, TickUpdate};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LifecycleError {
    #[error("panel {0:?} has no date filter and no time frame was imposed")]
    NoTimeFrame(String),
    #[error("invalid: {0}")]
    Invalid(ValidationReport),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("recurrence ended on {until}; clock is at {today}")]
    RecurrenceExpired { until: NaiveDate, today: NaiveDate },
    #[error("snapshot {0:?} is not set to recur automatically")]
    NotRecurring(String),
    #[error("a snapshot needs at least one component")]
    NoComponents,
    #[error("time frame overflows the calendar")]
    CalendarOverflow,
    #[error("no component {0:?} in the snapshot")]
    UnknownComponent(String),
    #[error("no snapshot {0:?}")]
    UnknownSnapshot(String),
}

impl LifecycleError {
    /// Stable error code for the service layer.
    pub fn code(&self) -> &'static str {
        match self {
            LifecycleError::NoTimeFrame(_) => "NO_TIME_FRAME",
            LifecycleError::Invalid(r) => r.violations.first().map_or("INVALID", |v| v.code.as_str()),
            LifecycleError::Template(e) => e.code().as_str(),
            LifecycleError::RecurrenceExpired { .. } => "RECURRENCE_EXPIRED",
            LifecycleError::NotRecurring(_) => "NOT_RECURRING",
            LifecycleError::NoComponents => "NO_COMPONENTS",
            LifecycleError::CalendarOverflow => "INVALID_TIME_FRAME",
            LifecycleError::UnknownComponent(_) => "UNKNOWN_COMPONENT",
            LifecycleError::UnknownSnapshot(_) => "UNKNOWN_SNAPSHOT",
        }
    }
}

fn check(report: ValidationReport) -> Result<(), LifecycleError> {
    if report.is_empty() {
        Ok(())
    } else {
        Err(LifecycleError::Invalid(report))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
#[serde(default)]
pub struct ComponentOptions {
    /// Defaults to the panel id.
    pub id: Option<String>,
    pub imposed_time_frame: Option<TimeFrame>,
    pub appearance: Option<Appearance>,
    pub template: Option<TemplateBinding>,
    pub interactive_filters: Vec<InteractiveFilter>,
    pub caption: Option<String>,
    pub custom_text: Option<String>,
    pub annotations: Vec<Annotation>,
}

/// The time frame implied by a selection: its first date-range filter on a temporal
/// dimension's column, else on any column.
pub fn selection_time_frame(sel: &DashboardSelection) -> Option<TimeFrame> {
    let temporal: Vec<&str> = sel
        .dimensions
        .iter()
        .filter(|d| d.kind == DimensionKind::Temporal)
        .map(|d| d.source_column.as_str())
        .collect();
    let frames = sel.data_filters.iter().filter_map(|f| match f.predicate {
        Predicate::DateRange { start, end } => {
            Duration::between(start, end).map(|d| (f.column.as_str(), TimeFrame::new(&f.column, start, d)))
        }
        _ => None,
    });
    let frames: Vec<(&str, TimeFrame)> = frames.collect();
    frames
        .iter()
        .find(|(col, _)| temporal.contains(col))
        .or_else(|| frames.first())
        .map(|(_, tf)| tf.clone())
}

/// Turns a dashboard panel into a component. Data source, filters, fields and the
/// original design are copied as they are.
pub fn create_component(
    sel: &DashboardSelection,
    opts: ComponentOptions,
    catalog: &Catalog,
) -> Result<ComponentSpec, LifecycleError> {
    let time_frame = selection_time_frame(sel)
        .or(opts.imposed_time_frame)
        .ok_or_else(|| LifecycleError::NoTimeFrame(sel.panel_id.clone()))?;
    let c = ComponentSpec {
        id: opts.id.unwrap_or_else(|| sel.panel_id.clone()),
        worksheet: Some(sel.worksheet.clone()),
        panel: Some(sel.panel_id.clone()),
        data_source: sel.data_source.clone(),
        data_filters: sel.data_filters.clone(),
        measures: sel.measures.clone(),
        dimensions: sel.dimensions.clone(),
        time_frame,
        original_design: sel.original_design.clone(),
        appearance: opts.appearance.unwrap_or(Appearance::Visual),
        template: opts.template,
        caption: opts.caption,
        custom_text: opts.custom_text,
        annotations: opts.annotations,
        interactive_filters: opts.interactive_filters,
    };
    if let Some(binding) = &c.template {
        let design = catalog
            .get(&binding.design)
            .ok_or_else(|| TemplateError::UnknownTemplate(binding.design.to_string()))?;
        mediate(&c, design, &binding.parameters, None)?;
    }
    check(validate_component_structure(&c))?;
    Ok(c)
}

/// Best-before date: the latest-ending time frame plus its own duration. Ties go to the
/// longer duration, then to the smaller component id.
pub fn infer_freshness(components: &[ComponentSpec]) -> Option<NaiveDate> {
    let pick = components.iter().max_by(|a, b| {
        let (ta, tb) = (&a.time_frame, &b.time_frame);
        ta.end()
            .cmp(&tb.end())
            .then_with(|| {
                let (ea, eb) = (ta.duration.add_to(ta.end()), tb.duration.add_to(tb.end()));
                ea.cmp(&eb)
            })
            .then_with(|| b.id.cmp(&a.id))
    })?;
    let tf = &pick.time_frame;
    tf.duration.add_to(tf.end())
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
#[serde(default)]
pub struct SnapshotOverrides {
    pub freshness: Option<NaiveDate>,
    pub completeness: Option<Completeness>,
    pub text_message: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotDraft {
    pub id: String,
    pub title: String,
    pub author: String,
    pub components: Vec<ComponentSpec>,
    pub curation: Curation,
    pub policy: UpdatePolicy,
    pub overrides: SnapshotOverrides,
}

pub fn compose_snapshot(draft: SnapshotDraft, clock: &dyn Clock) -> Result<SnapshotSpec, LifecycleError> {
    if draft.components.is_empty() {
        return Err(LifecycleError::NoComponents);
    }
    let freshness = match draft.overrides.freshness {
        Some(f) => f,
        None => infer_freshness(&draft.components).ok_or(LifecycleError::CalendarOverflow)?,
    };
    let s = SnapshotSpec {
        id: draft.id,
        title: draft.title,
        components: draft.components,
        curation: draft.curation,
        freshness,
        completeness: draft.overrides.completeness,
        text_message: draft.overrides.text_message,
        update_policy: draft.policy,
        created_at: clock.now(),
        author: draft.author,
        version: 1,
    };
    check(validate_structure(&s))?;
    Ok(s)
}

/// What an author changes in a manual update, per component id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
#[serde(default)]
pub struct ComponentEdit {
    pub time_frame: Option<TimeFrame>,
    pub annotations: Vec<Annotation>,
    pub caption: Option<String>,
    pub custom_text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
#[serde(default)]
pub struct ManualEdits {
    pub components: BTreeMap<String, ComponentEdit>,
    pub text_message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateMode {
    Auto,
    Manual(ManualEdits),
}

/// Moves the component to `frame`. A date-range filter spanning exactly the old frame
/// moves with it; other date filters stay where they are.
fn reframe(c: &mut ComponentSpec, frame: TimeFrame) {
    let (old_start, old_end) = (c.time_frame.start, c.time_frame.end());
    let (new_start, new_end) = (frame.start, frame.end());
    for f in &mut c.data_filters {
        if let DataFilter {
            column,
            predicate: Predicate::DateRange { start, end },
        } = f
        {
            if *column == c.time_frame.field && *start == old_start && *end == old_end {
                *start = new_start;
                *end = new_end;
            }
        }
    }
    c.time_frame = frame;
}

/// Produces the next version of `s`.
///
/// Auto: every time frame moves forward one period, and annotations, captions and custom
/// text are dropped. Manual: frames move to the author's, previous annotations and
/// free text are replaced by the author's edits.
pub fn update_snapshot(s: &SnapshotSpec, mode: &UpdateMode, clock: &dyn Clock) -> Result<SnapshotSpec, LifecycleError> {
    update_at(s, mode, clock.today(), clock)
}

/// Like [`update_snapshot`] with the expiry checked against `as_of` instead of the clock.
pub(crate) fn update_at(
    s: &SnapshotSpec,
    mode: &UpdateMode,
    as_of: NaiveDate,
    clock: &dyn Clock,
) -> Result<SnapshotSpec, LifecycleError> {
    let inferred_before = infer_freshness(&s.components);
    let mut next = s.clone();
    match mode {
        UpdateMode::Auto => {
            let rule = s
                .update_policy
                .recurrence()
                .ok_or_else(|| LifecycleError::NotRecurring(s.id.clone()))?;
            if as_of > rule.until {
                return Err(LifecycleError::RecurrenceExpired {
                    until: rule.until,
                    today: as_of,
                });
            }
            for c in &mut next.components {
                let frame = c.time_frame.shifted_by(rule.period).ok_or(LifecycleError::CalendarOverflow)?;
                reframe(c, frame);
                c.annotations.clear();
                c.caption = None;
                c.custom_text = None;
            }
            next.freshness = if inferred_before == Some(s.freshness) {
                infer_freshness(&next.components).ok_or(LifecycleError::CalendarOverflow)?
            } else {
                rule.period.add_to(s.freshness).ok_or(LifecycleError::CalendarOverflow)?
            };
        }
        UpdateMode::Manual(edits) => {
            if let Some(unknown) = edits.components.keys().find(|id| s.component(id).is_none()) {
                return Err(LifecycleError::UnknownComponent(unknown.clone()));
            }
            for c in &mut next.components {
                let edit = edits.components.get(&c.id).cloned().unwrap_or_default();
                if let Some(frame) = edit.time_frame {
                    reframe(c, frame);
                }
                c.annotations = edit.annotations;
                c.caption = edit.caption;
                c.custom_text = edit.custom_text;
            }
            if edits.text_message.is_some() {
                next.text_message = edits.text_message.clone();
            }
            if inferred_before == Some(s.freshness) {
                next.freshness = infer_freshness(&next.components).ok_or(LifecycleError::CalendarOverflow)?;
            }
        }
    }
    next.version = s.version + 1;
    next.created_at = clock.now();
    check(validate_structure(&next))?;
    Ok(next)
}

#[cfg(test)]
mod tests;
