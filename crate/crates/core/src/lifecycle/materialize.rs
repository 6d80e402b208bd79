use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::Clock;
use crate::data::{apply_filters, component_categories, detect_completeness, run_component_query, DataSourceRegistry, ResultTable};
use crate::model::{is_stale, ComponentSpec, Completeness, Curation, DataFilter, SnapshotSpec};
use crate::template::{render_component, BadgeKind, Catalog, RenderNode, RenderOptions};

/// The filters and time frame a component was computed under, shown with it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct TransparencyBlock {
    pub filters: Vec<String>,
    pub time_frame: String,
    /// Filters a viewer applied on top, in their private view only.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub viewer_filters: Vec<String>,
}

impl TransparencyBlock {
    pub fn of(c: &ComponentSpec, viewer_filters: &[DataFilter]) -> Self {
        let tf = &c.time_frame;
        let last = tf.end().pred_opt().unwrap_or(tf.start).max(tf.start);
        TransparencyBlock {
            filters: c.data_filters.iter().map(ToString::to_string).collect(),
            time_frame: format!("{}: {} to {} ({})", tf.field, tf.start, last, tf.duration),
            viewer_filters: viewer_filters.iter().map(ToString::to_string).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ComponentRender {
    pub component_id: String,
    pub node: RenderNode,
    pub transparency: TransparencyBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotLayout {
    pub curation: Curation,
    pub components: Vec<ComponentRender>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct FreshnessBadge {
    pub fresh_until: NaiveDate,
    pub stale: bool,
}

impl FreshnessBadge {
    pub fn at(fresh_until: NaiveDate, today: NaiveDate) -> Self {
        FreshnessBadge {
            fresh_until,
            stale: is_stale(fresh_until, today),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletenessBadge {
    pub complete: bool,
    pub detected: bool,
    pub note: Option<String>,
    /// `component: bucket start` for every empty bucket found by detection.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub missing: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SnapshotRender {
    pub snapshot_id: String,
    pub version: u32,
    pub title: String,
    pub layout: SnapshotLayout,
    /// One entry per component, in component order.
    pub transparency_block: Vec<(String, TransparencyBlock)>,
    pub freshness_badge: FreshnessBadge,
    pub completeness_badge: Option<CompletenessBadge>,
    pub text_message: Option<String>,
    pub produced_at: NaiveDateTime,
}

impl SnapshotRender {
    pub fn component(&self, id: &str) -> Option<&ComponentRender> {
        self.layout.components.iter().find(|c| c.component_id == id)
    }
}

fn error_badge(text: String) -> RenderNode {
    RenderNode::Group {
        children: vec![RenderNode::Badge {
            badge: BadgeKind::Error,
            text,
        }],
    }
}

/// Runs the component's query (with `extra` filters on top) and renders it. With
/// `check_coverage` the per-category parameters must cover the data's categories.
/// Returns the node and, when the query ran, its result.
pub fn render_component_data(
    c: &ComponentSpec,
    registry: &DataSourceRegistry,
    catalog: &Catalog,
    extra: &[DataFilter],
    check_coverage: bool,
) -> (RenderNode, Option<ResultTable>) {
    let table = match registry.resolve(&c.data_source) {
        Ok(t) => t,
        Err(e) => return (error_badge(e.to_string()), None),
    };
    let result = match run_component_query(&table, c, extra) {
        Ok(r) => r,
        Err(e) => return (error_badge(e.to_string()), None),
    };
    let categories = if check_coverage {
        match component_categories(&table, c) {
            Ok(cats) => Some(cats),
            Err(e) => return (error_badge(e.to_string()), None),
        }
    } else {
        None
    };
    let options = RenderOptions {
        categories: categories.as_deref(),
        ..RenderOptions::default()
    };
    let node = match render_component(c, catalog, &result, options) {
        Ok(RenderNode::Group { mut children }) => {
            children.extend(result.warnings.messages().into_iter().map(|text| RenderNode::Badge {
                badge: BadgeKind::Warning,
                text,
            }));
            RenderNode::Group { children }
        }
        Ok(other) => other,
        Err(e) => error_badge(e.to_string()),
    };
    (node, Some(result))
}

pub fn materialize_component(
    c: &ComponentSpec,
    registry: &DataSourceRegistry,
    catalog: &Catalog,
    extra: &[DataFilter],
    check_coverage: bool,
) -> ComponentRender {
    let (node, _) = render_component_data(c, registry, catalog, extra, check_coverage);
    ComponentRender {
        component_id: c.id.clone(),
        node,
        transparency: TransparencyBlock::of(c, extra),
    }
}

fn completeness_badge(s: &SnapshotSpec, registry: &DataSourceRegistry) -> Option<CompletenessBadge> {
    match s.completeness.as_ref()? {
        Completeness::Asserted { complete, note } => Some(CompletenessBadge {
            complete: *complete,
            detected: false,
            note: note.clone(),
            missing: Vec::new(),
            errors: Vec::new(),
        }),
        Completeness::Detect { granularity, note } => {
            let mut badge = CompletenessBadge {
                complete: true,
                detected: true,
                note: note.clone(),
                missing: Vec::new(),
                errors: Vec::new(),
            };
            for c in &s.components {
                let report = registry
                    .resolve(&c.data_source)
                    .and_then(|t| apply_filters(&t, &c.data_filters))
                    .and_then(|t| detect_completeness(&t, &c.time_frame, *granularity));
                match report {
                    Ok(r) => {
                        badge.complete &= r.complete;
                        badge.missing.extend(r.missing.iter().map(|m| format!("{}: {m}", c.id)));
                    }
                    Err(e) => {
                        badge.complete = false;
                        badge.errors.push(format!("{}: {e}", c.id));
                    }
                }
            }
            Some(badge)
        }
    }
}

/// Renders every component of `s`. A component whose data cannot be loaded becomes an
/// error badge; the rest still render.
pub fn materialize(s: &SnapshotSpec, registry: &DataSourceRegistry, catalog: &Catalog, clock: &dyn Clock) -> SnapshotRender {
    let components: Vec<ComponentRender> = s
        .components
        .iter()
        .map(|c| materialize_component(c, registry, catalog, &[], true))
        .collect();
    SnapshotRender {
        snapshot_id: s.id.clone(),
        version: s.version,
        title: s.title.clone(),
        transparency_block: components
            .iter()
            .map(|c| (c.component_id.clone(), c.transparency.clone()))
            .collect(),
        layout: SnapshotLayout {
            curation: s.curation,
            components,
        },
        freshness_badge: FreshnessBadge::at(s.freshness, clock.today()),
        completeness_badge: completeness_badge(s, registry),
        text_message: s.text_message.clone(),
        produced_at: clock.now(),
    }
}
