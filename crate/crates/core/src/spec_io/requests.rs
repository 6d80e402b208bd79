//! Request documents: creating a component from a panel, composing a snapshot and
//! editing one by hand. Same surface syntax as specs, so JSON bodies parse too.

use std::collections::BTreeMap;

use super::decode::Decoder;
use super::read::{annotation, completeness, component, curation, interactive_filter, template_binding, time_frame, update_policy};
use super::yaml::Node;
use super::ParseError;
use crate::platform::FilterRequest;
use crate::lifecycle::{ComponentEdit, ComponentOptions, ManualEdits, SnapshotDraft, SnapshotOverrides};
use crate::model::*;

type R<T> = Result<T, ParseError>;

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentRequest {
    pub dashboard: String,
    pub panel: String,
    pub options: ComponentOptions,
}

pub fn component_request(d: &mut Decoder, node: &Node, path: &str) -> R<ComponentRequest> {
    let m = d.map(
        node,
        path,
        &[
            "dashboard",
            "panel",
            "id",
            "time-frame",
            "appearance",
            "template-config",
            "interactive-filters",
            "caption",
            "custom-text",
            "annotations",
        ],
    )?;
    let opt_string = |d: &Decoder, key: &str| m.get(key).map(|n| d.string(n, &m.path_of(key))).transpose();
    let annotations = match m.get("annotations") {
        Some(n) => d.list(n, &m.path_of("annotations"), annotation)?,
        None => Vec::new(),
    };
    let interactive_filters = match m.get("interactive-filters") {
        Some(n) => d.list(n, &m.path_of("interactive-filters"), interactive_filter)?,
        None => Vec::new(),
    };
    Ok(ComponentRequest {
        dashboard: d.nonempty_string(m.require(d, "dashboard")?, &m.path_of("dashboard"))?,
        panel: d.nonempty_string(m.require(d, "panel")?, &m.path_of("panel"))?,
        options: ComponentOptions {
            id: m.get("id").map(|n| d.nonempty_string(n, &m.path_of("id"))).transpose()?,
            imposed_time_frame: m
                .get("time-frame")
                .map(|n| time_frame(d, n, &m.path_of("time-frame")))
                .transpose()?,
            appearance: m
                .get("appearance")
                .map(|n| d.keyword(n, &m.path_of("appearance"), &["visual", "text", "both"], Appearance::parse))
                .transpose()?,
            template: m
                .get("template-config")
                .map(|n| template_binding(d, n, &m.path_of("template-config")))
                .transpose()?,
            interactive_filters,
            caption: opt_string(d, "caption")?,
            custom_text: opt_string(d, "custom-text")?,
            annotations,
        },
    })
}

/// A snapshot before it exists: no creation time or version yet.
pub fn snapshot_draft(d: &mut Decoder, node: &Node, path: &str) -> R<SnapshotDraft> {
    let (mut draft, components) = snapshot_draft_with(d, node, path, component)?;
    draft.components = components;
    Ok(draft)
}

/// Like [`snapshot_draft`] but with components decoded by `each`; the returned draft
/// has no components of its own.
pub fn snapshot_draft_with<T>(
    d: &mut Decoder,
    node: &Node,
    path: &str,
    each: impl FnMut(&mut Decoder, &Node, &str) -> R<T>,
) -> R<(SnapshotDraft, Vec<T>)> {
    let m = d.map(
        node,
        path,
        &[
            "id",
            "title",
            "author",
            "components",
            "curation",
            "freshness",
            "completeness",
            "text-message",
            "update-policy",
        ],
    )?;
    let components = d.list(m.require(d, "components")?, &m.path_of("components"), each)?;
    let draft = SnapshotDraft {
        id: d.nonempty_string(m.require(d, "id")?, &m.path_of("id"))?,
        title: d.string(m.require(d, "title")?, &m.path_of("title"))?,
        author: d.nonempty_string(m.require(d, "author")?, &m.path_of("author"))?,
        components: Vec::new(),
        curation: match m.get("curation") {
            Some(n) => curation(d, n, &m.path_of("curation"))?,
            None => Curation::Stack,
        },
        policy: match m.get("update-policy") {
            Some(n) => update_policy(d, n, &m.path_of("update-policy"))?,
            None => UpdatePolicy::ManualAuthor,
        },
        overrides: SnapshotOverrides {
            freshness: m.get("freshness").map(|n| d.date(n, &m.path_of("freshness"))).transpose()?,
            completeness: m
                .get("completeness")
                .map(|n| completeness(d, n, &m.path_of("completeness")))
                .transpose()?,
            text_message: m
                .get("text-message")
                .map(|n| d.string(n, &m.path_of("text-message")))
                .transpose()?,
        },
    };
    Ok((draft, components))
}

fn component_edit(d: &mut Decoder, node: &Node, path: &str) -> R<ComponentEdit> {
    let m = d.map(node, path, &["time-frame", "annotations", "caption", "custom-text"])?;
    Ok(ComponentEdit {
        time_frame: m
            .get("time-frame")
            .map(|n| time_frame(d, n, &m.path_of("time-frame")))
            .transpose()?,
        annotations: match m.get("annotations") {
            Some(n) => d.list(n, &m.path_of("annotations"), annotation)?,
            None => Vec::new(),
        },
        caption: m.get("caption").map(|n| d.string(n, &m.path_of("caption"))).transpose()?,
        custom_text: m.get("custom-text").map(|n| d.string(n, &m.path_of("custom-text"))).transpose()?,
    })
}

pub fn manual_edits(d: &mut Decoder, node: &Node, path: &str) -> R<ManualEdits> {
    let m = d.map(node, path, &["components", "text-message"])?;
    let mut components = BTreeMap::new();
    if let Some(n) = m.get("components") {
        let p = m.path_of("components");
        for (k, v) in d.open_map(n, &p)? {
            let edit = component_edit(d, v, &super::decode::join(&p, &k.text))?;
            components.insert(k.text.clone(), edit);
        }
    }
    Ok(ManualEdits {
        components,
        text_message: m
            .get("text-message")
            .map(|n| d.string(n, &m.path_of("text-message")))
            .transpose()?,
    })
}

/// `{dropdown: {column, value}}`, `{slider: {column, min, max}}`, `{macro: name}` or
/// `{clear: key}` (`clear: all` drops every filter).
pub fn filter_request(d: &mut Decoder, node: &Node, path: &str) -> R<FilterRequest> {
    let m = d.map(node, path, &["dropdown", "slider", "macro", "clear"])?;
    let which = super::read::one_of(d, &m, &["dropdown", "slider", "macro", "clear"], "a filter request")?;
    let n = m.require(d, which)?;
    let p = m.path_of(which);
    Ok(match which {
        "dropdown" => {
            let f = d.map(n, &p, &["column", "value"])?;
            FilterRequest::Dropdown {
                column: d.nonempty_string(f.require(d, "column")?, &f.path_of("column"))?,
                value: d.string(f.require(d, "value")?, &f.path_of("value"))?,
            }
        }
        "slider" => {
            let f = d.map(n, &p, &["column", "min", "max"])?;
            FilterRequest::Slider {
                column: d.nonempty_string(f.require(d, "column")?, &f.path_of("column"))?,
                min: d.number(f.require(d, "min")?, &f.path_of("min"))?,
                max: d.number(f.require(d, "max")?, &f.path_of("max"))?,
            }
        }
        "macro" => FilterRequest::Macro {
            name: d.nonempty_string(n, &p)?,
        },
        _ => {
            let key = d.nonempty_string(n, &p)?;
            FilterRequest::Clear {
                key: (key != "all").then_some(key),
            }
        }
    })
}
