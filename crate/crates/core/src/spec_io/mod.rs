//! Reading and writing the YAML surface form of snapshots, components and dashboards.

pub(crate) mod decode;
pub mod encode;
pub(crate) mod read;
pub(crate) mod requests;
pub mod yaml;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::DataSourceRegistry;
use crate::model::*;
use crate::template::Catalog;

pub use decode::{parse_datetime, parse_time};
pub use encode::{format_datetime, format_time};
pub use requests::ComponentRequest;

/// A document that could not be turned into a spec. Positions are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseError {
    pub code: ViolationCode,
    pub line: usize,
    pub column: usize,
    pub path: String,
    pub message: String,
}

impl ParseError {
    pub fn span(&self) -> SourceSpan {
        SourceSpan {
            line: self.line,
            column: self.column,
        }
    }

    pub fn to_violation(&self) -> Violation {
        Violation {
            code: self.code,
            path: self.path.clone(),
            message: self.message.clone(),
            span: Some(self.span()),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.code)?;
        if !self.path.is_empty() {
            write!(f, " at {}", self.path)?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq)]
pub enum ParsedSpec {
    Snapshot(SnapshotSpec),
    Component(ComponentSpec),
    Dashboard(Dashboard),
}

/// A parsed document together with where each path came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecDocument {
    pub raw_text: String,
    pub parsed: ParsedSpec,
    pub source_span_index: BTreeMap<String, SourceSpan>,
}

/// Drops the last `.key` or `[i]` segment.
fn parent_path(path: &str) -> Option<&str> {
    let cut = path.rfind(['.', '['])?;
    Some(&path[..cut])
}

impl SpecDocument {
    /// Span of `path`, or of its nearest ancestor that has one.
    pub fn span_of(&self, path: &str) -> Option<SourceSpan> {
        span_in(&self.source_span_index, path)
    }
}

fn span_in(index: &BTreeMap<String, SourceSpan>, path: &str) -> Option<SourceSpan> {
    let mut p = path;
    loop {
        if let Some(s) = index.get(p) {
            return Some(*s);
        }
        p = parent_path(p)?;
    }
}

fn root_span(index: &BTreeMap<String, SourceSpan>) -> SourceSpan {
    index.values().min().copied().unwrap_or(SourceSpan { line: 1, column: 1 })
}

/// Turns the first structural violation into a parse error placed at its path.
fn reject(report: ValidationReport, index: &BTreeMap<String, SourceSpan>, strip: &str) -> Result<(), ParseError> {
    let Some(v) = report.violations.into_iter().next() else { return Ok(()) };
    let path = relative(&v.path, strip).to_string();
    let at = span_in(index, &path).unwrap_or_else(|| root_span(index));
    Err(ParseError {
        code: v.code,
        line: at.line,
        column: at.column,
        path,
        message: v.message,
    })
}

fn relative<'a>(path: &'a str, prefix: &str) -> &'a str {
    if prefix.is_empty() {
        return path;
    }
    match path.strip_prefix(prefix) {
        Some(rest) => rest.strip_prefix('.').unwrap_or(rest),
        None => path,
    }
}

fn root_keys(node: &yaml::Node) -> Vec<&str> {
    node.as_map()
        .map(|m| m.iter().map(|(k, _)| k.text.as_str()).collect())
        .unwrap_or_default()
}

/// Parses a snapshot, component or dashboard, telling them apart by their top-level keys.
pub fn parse_document(text: &str) -> Result<SpecDocument, ParseError> {
    let node = yaml::parse_node(text)?;
    let keys = root_keys(&node);
    let mut d = decode::Decoder::default();
    let parsed = if keys.contains(&"components") {
        let s = read::snapshot(&mut d, &node, "")?;
        reject(validate_structure(&s), &d.spans, "")?;
        ParsedSpec::Snapshot(s)
    } else if keys.contains(&"panels") {
        ParsedSpec::Dashboard(read::dashboard(&mut d, &node, "")?)
    } else {
        let c = read::component(&mut d, &node, "")?;
        reject(validate_component_structure(&c), &d.spans, "component")?;
        ParsedSpec::Component(c)
    };
    Ok(SpecDocument {
        raw_text: text.to_string(),
        parsed,
        source_span_index: d.spans,
    })
}

/// Parses a snapshot document. Unknown keys and structurally invalid specs are rejected.
pub fn parse_snapshot(text: &str) -> Result<SnapshotSpec, ParseError> {
    let node = yaml::parse_node(text)?;
    let mut d = decode::Decoder::default();
    let s = read::snapshot(&mut d, &node, "")?;
    reject(validate_structure(&s), &d.spans, "")?;
    Ok(s)
}

pub fn parse_component(text: &str) -> Result<ComponentSpec, ParseError> {
    let node = yaml::parse_node(text)?;
    let mut d = decode::Decoder::default();
    let c = read::component(&mut d, &node, "")?;
    reject(validate_component_structure(&c), &d.spans, "component")?;
    Ok(c)
}

pub fn parse_dashboard(text: &str) -> Result<Dashboard, ParseError> {
    let node = yaml::parse_node(text)?;
    read::dashboard(&mut decode::Decoder::default(), &node, "")
}

pub fn parse_selection(text: &str) -> Result<DashboardSelection, ParseError> {
    let node = yaml::parse_node(text)?;
    read::selection(&mut decode::Decoder::default(), &node, "")
}

/// `{dashboard, panel, ...options}`: what to build a component from.
pub fn parse_component_request(text: &str) -> Result<ComponentRequest, ParseError> {
    let node = yaml::parse_node(text)?;
    requests::component_request(&mut decode::Decoder::default(), &node, "")
}

pub fn parse_snapshot_draft(text: &str) -> Result<crate::lifecycle::SnapshotDraft, ParseError> {
    let node = yaml::parse_node(text)?;
    let mut d = decode::Decoder::default();
    let draft = requests::snapshot_draft(&mut d, &node, "")?;
    for (i, c) in draft.components.iter().enumerate() {
        let mut report = validate_component_structure(c);
        for v in &mut report.violations {
            v.path = format!("components[{i}]{}", v.path.strip_prefix("component").unwrap_or(&v.path));
        }
        reject(report, &d.spans, "")?;
    }
    Ok(draft)
}

pub fn parse_manual_edits(text: &str) -> Result<crate::lifecycle::ManualEdits, ParseError> {
    let node = yaml::parse_node(text)?;
    requests::manual_edits(&mut decode::Decoder::default(), &node, "")
}

pub fn parse_filter_request(text: &str) -> Result<crate::platform::FilterRequest, ParseError> {
    let node = yaml::parse_node(text)?;
    requests::filter_request(&mut decode::Decoder::default(), &node, "")
}

/// Canonical YAML: fixed key order, two-space indentation, ISO-8601 dates.
pub fn serialize_snapshot(s: &SnapshotSpec) -> String {
    encode::to_yaml(&encode::snapshot(s))
}

pub fn serialize_component(c: &ComponentSpec) -> String {
    encode::to_yaml(&encode::component(c))
}

pub fn serialize_dashboard(d: &Dashboard) -> String {
    encode::to_yaml(&encode::dashboard(d))
}

/// The JSON rendering of the same surface form; [`parse_snapshot`] reads it back.
pub fn snapshot_to_json(s: &SnapshotSpec) -> serde_json::Value {
    encode::to_json(&encode::snapshot(s))
}

pub fn component_to_json(c: &ComponentSpec) -> serde_json::Value {
    encode::to_json(&encode::component(c))
}

pub fn selection_to_json(p: &DashboardSelection) -> serde_json::Value {
    encode::to_json(&encode::selection(p))
}

pub fn dashboard_to_json(d: &Dashboard) -> serde_json::Value {
    encode::to_json(&encode::dashboard(d))
}

/// Serde adapters that embed specs in their surface JSON form, used by the store.
pub mod surface {
    use std::collections::BTreeMap;

    use serde::de::Error as _;
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::model::{Dashboard, SnapshotSpec};

    pub mod snapshots {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[SnapshotSpec], ser: S) -> Result<S::Ok, S::Error> {
            let mut seq = ser.serialize_seq(Some(v.len()))?;
            for s in v {
                seq.serialize_element(&super::super::snapshot_to_json(s))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<SnapshotSpec>, D::Error> {
            Vec::<serde_json::Value>::deserialize(de)?
                .iter()
                .map(|v| super::super::parse_snapshot(&v.to_string()).map_err(D::Error::custom))
                .collect()
        }
    }

    pub mod dashboards {
        use super::*;

        pub fn serialize<S: Serializer>(v: &BTreeMap<String, Dashboard>, ser: S) -> Result<S::Ok, S::Error> {
            ser.collect_map(v.iter().map(|(k, d)| (k, super::super::dashboard_to_json(d))))
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<BTreeMap<String, Dashboard>, D::Error> {
            BTreeMap::<String, serde_json::Value>::deserialize(de)?
                .into_iter()
                .map(|(k, v)| Ok((k, super::super::parse_dashboard(&v.to_string()).map_err(D::Error::custom)?)))
                .collect()
        }
    }
}

fn index_node(node: &yaml::Node, path: &str, out: &mut BTreeMap<String, SourceSpan>) {
    match &node.kind {
        yaml::NodeKind::Map(entries) => {
            for (k, v) in entries {
                let p = decode::join(path, &k.text);
                out.insert(p.clone(), k.span);
                index_node(v, &p, out);
            }
        }
        yaml::NodeKind::Seq(items) => {
            for (i, v) in items.iter().enumerate() {
                let p = decode::index(path, i);
                out.insert(p.clone(), v.span);
                index_node(v, &p, out);
            }
        }
        yaml::NodeKind::Scalar { .. } => {}
    }
}

/// Places each violation of `report` in `text` by its path, falling back to the nearest
/// ancestor. Text that does not parse leaves the report as it is.
pub fn locate(report: ValidationReport, text: &str) -> ValidationReport {
    let Ok(node) = yaml::parse_node(text) else { return report };
    let mut index = BTreeMap::new();
    index.insert(String::new(), node.span);
    index_node(&node, "", &mut index);
    attach_spans(report, &index, "")
}

fn attach_spans(report: ValidationReport, index: &BTreeMap<String, SourceSpan>, strip: &str) -> ValidationReport {
    ValidationReport {
        violations: report
            .violations
            .into_iter()
            .map(|mut v| {
                v.path = relative(&v.path, strip).to_string();
                v.span = span_in(index, &v.path).or_else(|| Some(root_span(index)));
                v
            })
            .collect(),
    }
}

/// Parses and validates `text`, attaching a source span to every entry.
///
/// A document that does not parse yields exactly one entry. Without a registry only
/// checks that need no data run.
pub fn lint(text: &str, registry: Option<&DataSourceRegistry>, catalog: &Catalog) -> ValidationReport {
    let doc = match parse_document(text) {
        Ok(doc) => doc,
        Err(e) => {
            return ValidationReport {
                violations: vec![e.to_violation()],
            }
        }
    };
    let index = &doc.source_span_index;
    match (&doc.parsed, registry) {
        (_, None) => ValidationReport::default(),
        (ParsedSpec::Snapshot(s), Some(reg)) => attach_spans(validate_snapshot(s, reg, catalog), index, ""),
        (ParsedSpec::Component(c), Some(reg)) => {
            let report = match reg.resolve(&c.data_source) {
                Ok(t) => validate_component(c, &t.schema(), catalog),
                Err(e) => {
                    let mut r = ValidationReport::default();
                    r.push(ViolationCode::UnknownDataSource, "component.data-source", e.to_string());
                    r
                }
            };
            attach_spans(report, index, "component")
        }
        (ParsedSpec::Dashboard(dash), Some(reg)) => {
            let mut out = ValidationReport::default();
            for (i, p) in dash.panels.iter().enumerate() {
                let prefix = format!("panels.{}", p.panel_id);
                let mut report = match reg.resolve(&p.data_source) {
                    Ok(t) => validate_selection(p, &t.schema()),
                    Err(e) => {
                        let mut r = ValidationReport::default();
                        r.push(ViolationCode::UnknownDataSource, format!("{prefix}.data-source"), e.to_string());
                        r
                    }
                };
                for v in &mut report.violations {
                    if let Some(rest) = v.path.strip_prefix(&prefix) {
                        v.path = format!("panels[{i}]{rest}");
                    }
                }
                out.extend(attach_spans(report, index, ""));
            }
            out
        }
    }
}
