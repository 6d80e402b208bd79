use std::collections::BTreeMap;

use super::decode::{Decoder, MapReader};
use super::yaml::Node;
use super::ParseError;
use crate::model::*;

type R<T> = Result<T, ParseError>;

fn invalid(d: &Decoder, node: &Node, path: &str, message: impl Into<String>) -> ParseError {
    d.error(ViolationCode::InvalidValue, node.span, path, message)
}

/// Exactly one of `keys` must be present in `m`.
pub(crate) fn one_of<'k>(d: &Decoder, m: &MapReader, keys: &[&'k str], what: &str) -> R<&'k str> {
    let present: Vec<&str> = keys.iter().copied().filter(|k| m.has(k)).collect();
    match present.as_slice() {
        [one] => Ok(keys.iter().copied().find(|k| k == one).unwrap_or(one)),
        [] => Err(d.error(
            ViolationCode::MissingField,
            m.node.span,
            m.path(),
            format!("{what} needs one of: {}", keys.join(", ")),
        )),
        many => Err(invalid(
            d,
            m.node,
            m.path(),
            format!("{what} takes only one of {}, found {}", keys.join(", "), many.join(" and ")),
        )),
    }
}

pub fn measure(d: &mut Decoder, node: &Node, path: &str) -> R<Measure> {
    let m = d.map(node, path, &["name", "kind", "source-column", "aggregate", "expression", "unit"])?;
    let name = d.nonempty_string(m.require(d, "name")?, &m.path_of("name"))?;
    let kind_node = m.require(d, "kind")?;
    let kind_path = m.path_of("kind");
    let kind = d.keyword(kind_node, &kind_path, &["column", "aggregated", "computed"], |s| match s {
        "column" | "aggregated" | "computed" => Some(s.to_string()),
        _ => None,
    })?;
    let forbid = |key: &str| -> R<()> {
        match m.get(key) {
            Some(n) => Err(invalid(d, n, &m.path_of(key), format!("a {kind} measure must not set `{key}`"))),
            None => Ok(()),
        }
    };
    let kind = match kind.as_str() {
        "column" => {
            forbid("aggregate")?;
            forbid("expression")?;
            MeasureKind::Column {
                source_column: d.nonempty_string(m.require(d, "source-column")?, &m.path_of("source-column"))?,
            }
        }
        "aggregated" => {
            forbid("expression")?;
            MeasureKind::Aggregated {
                source_column: d.nonempty_string(m.require(d, "source-column")?, &m.path_of("source-column"))?,
                aggregate: d.keyword(
                    m.require(d, "aggregate")?,
                    &m.path_of("aggregate"),
                    &["sum", "avg", "min", "max", "count"],
                    Aggregate::parse,
                )?,
            }
        }
        _ => {
            forbid("aggregate")?;
            forbid("source-column")?;
            let n = m.require(d, "expression")?;
            let p = m.path_of("expression");
            let text = d.string(n, &p)?;
            let expression: Expr = text
                .parse()
                .map_err(|e: ExprError| invalid(d, n, &p, format!("bad expression: {e}")))?;
            MeasureKind::Computed { expression }
        }
    };
    let unit = m.get("unit").map(|n| d.string(n, &m.path_of("unit"))).transpose()?;
    Ok(Measure { name, kind, unit })
}

pub fn dimension(d: &mut Decoder, node: &Node, path: &str) -> R<Dimension> {
    let m = d.map(node, path, &["name", "source-column", "kind"])?;
    let name = d.nonempty_string(m.require(d, "name")?, &m.path_of("name"))?;
    let source_column = match m.get("source-column") {
        Some(n) => d.nonempty_string(n, &m.path_of("source-column"))?,
        None => name.clone(),
    };
    let kind = d.keyword(m.require(d, "kind")?, &m.path_of("kind"), &["nominal", "temporal"], |s| match s {
        "nominal" => Some(DimensionKind::Nominal),
        "temporal" => Some(DimensionKind::Temporal),
        _ => None,
    })?;
    Ok(Dimension {
        name,
        source_column,
        kind,
    })
}

pub fn data_filter(d: &mut Decoder, node: &Node, path: &str) -> R<DataFilter> {
    const PREDICATES: [&str; 4] = ["equals", "one-of", "range", "date-range"];
    let m = d.map(node, path, &["column", "equals", "one-of", "range", "date-range"])?;
    let column = d.nonempty_string(m.require(d, "column")?, &m.path_of("column"))?;
    let which = one_of(d, &m, &PREDICATES, "a data filter")?;
    let n = m.require(d, which)?;
    let p = m.path_of(which);
    let predicate = match which {
        "equals" => Predicate::Equals(d.string(n, &p)?),
        "one-of" => {
            let values = d.strings(n, &p)?;
            if values.is_empty() {
                return Err(invalid(d, n, &p, "one-of needs at least one value"));
            }
            Predicate::OneOf(values)
        }
        "range" => {
            let r = d.map(n, &p, &["min", "max"])?;
            Predicate::Range {
                min: d.number(r.require(d, "min")?, &r.path_of("min"))?,
                max: d.number(r.require(d, "max")?, &r.path_of("max"))?,
            }
        }
        _ => {
            let r = d.map(n, &p, &["start", "end"])?;
            Predicate::DateRange {
                start: d.date(r.require(d, "start")?, &r.path_of("start"))?,
                end: d.date(r.require(d, "end")?, &r.path_of("end"))?,
            }
        }
    };
    Ok(DataFilter { column, predicate })
}

pub fn time_frame(d: &mut Decoder, node: &Node, path: &str) -> R<TimeFrame> {
    let m = d.map(node, path, &["field", "start", "duration"])?;
    let tf = TimeFrame {
        field: d.nonempty_string(m.require(d, "field")?, &m.path_of("field"))?,
        start: d.date(m.require(d, "start")?, &m.path_of("start"))?,
        duration: d.duration(m.require(d, "duration")?, &m.path_of("duration"))?,
    };
    if tf.duration.add_to(tf.start).is_none() {
        return Err(invalid(d, node, path, "time frame end is out of calendar range"));
    }
    Ok(tf)
}

pub fn scale(d: &mut Decoder, node: &Node, path: &str) -> R<Scale> {
    let m = d.map(node, path, &["field", "type", "domain", "range"])?;
    Ok(Scale {
        field: d.nonempty_string(m.require(d, "field")?, &m.path_of("field"))?,
        scale_type: d.keyword(
            m.require(d, "type")?,
            &m.path_of("type"),
            &["linear", "log", "ordinal", "time"],
            ScaleType::parse,
        )?,
        domain: m.get("domain").map(|n| d.strings(n, &m.path_of("domain"))).transpose()?.unwrap_or_default(),
        range: m.get("range").map(|n| d.strings(n, &m.path_of("range"))).transpose()?.unwrap_or_default(),
    })
}

pub fn original_design(d: &mut Decoder, node: &Node, path: &str) -> R<OriginalDesign> {
    let m = d.map(node, path, &["mark", "encodings", "scales"])?;
    let mark = d.keyword(
        m.require(d, "mark")?,
        &m.path_of("mark"),
        &["bar", "line", "area", "point", "text-metric"],
        Mark::parse,
    )?;
    let mut encodings = BTreeMap::new();
    if let Some(n) = m.get("encodings") {
        let p = m.path_of("encodings");
        let e = d.map(n, &p, &["x", "y", "color"])?;
        for ch in Channel::ALL {
            if let Some(v) = e.get(ch.as_str()) {
                encodings.insert(ch, d.nonempty_string(v, &e.path_of(ch.as_str()))?);
            }
        }
    }
    let scales = match m.get("scales") {
        Some(n) => d.list(n, &m.path_of("scales"), scale)?,
        None => Vec::new(),
    };
    Ok(OriginalDesign { mark, encodings, scales })
}

pub fn annotation(d: &mut Decoder, node: &Node, path: &str) -> R<Annotation> {
    let m = d.map(node, path, &["kind", "category", "threshold", "point", "text"])?;
    let kind = d.keyword(
        m.require(d, "kind")?,
        &m.path_of("kind"),
        &["highlight", "reference-line", "note"],
        AnnotationKind::parse,
    )?;
    let which = one_of(d, &m, &["category", "threshold", "point"], "an annotation target")?;
    let n = m.require(d, which)?;
    let p = m.path_of(which);
    let target = match which {
        "category" => AnnotationTarget::Category(d.string(n, &p)?),
        "threshold" => AnnotationTarget::Threshold(d.number(n, &p)?),
        _ => AnnotationTarget::Point(d.string(n, &p)?),
    };
    let text = m.get("text").map(|n| d.string(n, &m.path_of("text"))).transpose()?;
    Ok(Annotation { kind, target, text })
}

pub fn interactive_filter(d: &mut Decoder, node: &Node, path: &str) -> R<InteractiveFilter> {
    let m = d.map(node, path, &["dropdown", "slider", "macro"])?;
    let which = one_of(d, &m, &["dropdown", "slider", "macro"], "an interactive filter")?;
    let n = m.require(d, which)?;
    let p = m.path_of(which);
    Ok(match which {
        "dropdown" => {
            let f = d.map(n, &p, &["column", "values"])?;
            InteractiveFilter::Dropdown {
                column: d.nonempty_string(f.require(d, "column")?, &f.path_of("column"))?,
                values: d.strings(f.require(d, "values")?, &f.path_of("values"))?,
            }
        }
        "slider" => {
            let f = d.map(n, &p, &["column", "min", "max"])?;
            InteractiveFilter::Slider {
                column: d.nonempty_string(f.require(d, "column")?, &f.path_of("column"))?,
                min: d.number(f.require(d, "min")?, &f.path_of("min"))?,
                max: d.number(f.require(d, "max")?, &f.path_of("max"))?,
            }
        }
        _ => {
            let f = d.map(n, &p, &["name", "filters"])?;
            InteractiveFilter::Macro {
                name: d.nonempty_string(f.require(d, "name")?, &f.path_of("name"))?,
                filters: d.list(f.require(d, "filters")?, &f.path_of("filters"), data_filter)?,
            }
        }
    })
}

pub fn param_value(d: &mut Decoder, node: &Node, path: &str) -> R<ParamValue> {
    if node.as_map().is_some() {
        let entries = d.open_map(node, path)?;
        let mut out = BTreeMap::new();
        for (k, v) in entries {
            out.insert(k.text.clone(), d.number(v, &super::decode::join(path, &k.text))?);
        }
        return Ok(ParamValue::PerCategory(out));
    }
    let text = d.string(node, path)?;
    if !node.is_quoted() {
        if let Ok(n) = text.trim().parse::<f64>() {
            if n.is_finite() {
                return Ok(ParamValue::Number(n));
            }
        }
    }
    Ok(ParamValue::Text(text))
}

pub fn template_binding(d: &mut Decoder, node: &Node, path: &str) -> R<TemplateBinding> {
    let m = d.map(node, path, &["design", "parameters"])?;
    let design = TemplateId(d.nonempty_string(m.require(d, "design")?, &m.path_of("design"))?);
    let mut parameters = BTreeMap::new();
    if let Some(n) = m.get("parameters") {
        let p = m.path_of("parameters");
        for (k, v) in d.open_map(n, &p)? {
            parameters.insert(k.text.clone(), param_value(d, v, &super::decode::join(&p, &k.text))?);
        }
    }
    Ok(TemplateBinding { design, parameters })
}

fn opt_list<T>(
    d: &mut Decoder,
    m: &MapReader,
    key: &str,
    each: impl FnMut(&mut Decoder, &Node, &str) -> R<T>,
) -> R<Vec<T>> {
    match m.get(key) {
        Some(n) => d.list(n, &m.path_of(key), each),
        None => Ok(Vec::new()),
    }
}

pub const COMPONENT_KEYS: [&str; 15] = [
    "id",
    "worksheet",
    "panel",
    "data-source",
    "data-filters",
    "measures",
    "dimensions",
    "time-frame",
    "original-design",
    "appearance",
    "template-config",
    "caption",
    "custom-text",
    "annotations",
    "interactive-filters",
];

pub fn component(d: &mut Decoder, node: &Node, path: &str) -> R<ComponentSpec> {
    let m = d.map(node, path, &COMPONENT_KEYS)?;
    let opt_string = |d: &Decoder, key: &str| m.get(key).map(|n| d.string(n, &m.path_of(key))).transpose();
    let measures_node = m.require(d, "measures")?;
    let measures = d.list(measures_node, &m.path_of("measures"), measure)?;
    if measures.is_empty() {
        return Err(invalid(d, measures_node, &m.path_of("measures"), "a component needs at least one measure"));
    }
    Ok(ComponentSpec {
        id: d.nonempty_string(m.require(d, "id")?, &m.path_of("id"))?,
        worksheet: opt_string(d, "worksheet")?,
        panel: opt_string(d, "panel")?,
        data_source: d.nonempty_string(m.require(d, "data-source")?, &m.path_of("data-source"))?,
        data_filters: opt_list(d, &m, "data-filters", data_filter)?,
        measures,
        dimensions: opt_list(d, &m, "dimensions", dimension)?,
        time_frame: time_frame(d, m.require(d, "time-frame")?, &m.path_of("time-frame"))?,
        original_design: original_design(d, m.require(d, "original-design")?, &m.path_of("original-design"))?,
        appearance: match m.get("appearance") {
            Some(n) => d.keyword(n, &m.path_of("appearance"), &["visual", "text", "both"], Appearance::parse)?,
            None => Appearance::Visual,
        },
        template: m
            .get("template-config")
            .map(|n| template_binding(d, n, &m.path_of("template-config")))
            .transpose()?,
        caption: opt_string(d, "caption")?,
        custom_text: opt_string(d, "custom-text")?,
        annotations: opt_list(d, &m, "annotations", annotation)?,
        interactive_filters: opt_list(d, &m, "interactive-filters", interactive_filter)?,
    })
}

pub fn curation(d: &mut Decoder, node: &Node, path: &str) -> R<Curation> {
    if let Some(s) = node.as_scalar() {
        return match s.trim() {
            "stack" => Ok(Curation::Stack),
            "carousel" => Ok(Curation::Carousel),
            "slideshow" => Ok(Curation::slideshow()),
            "mini-dashboard" => Ok(Curation::mini_dashboard()),
            other => Err(invalid(
                d,
                node,
                path,
                format!("{other:?} is not one of: stack, carousel, slideshow, mini-dashboard"),
            )),
        };
    }
    let m = d.map(node, path, &["stack", "carousel", "slideshow", "mini-dashboard"])?;
    let which = one_of(d, &m, &["stack", "carousel", "slideshow", "mini-dashboard"], "curation")?;
    let n = m.get(which);
    let p = m.path_of(which);
    Ok(match which {
        "slideshow" => {
            let interval_secs = match n {
                Some(n) => {
                    let s = d.map(n, &p, &["interval"])?;
                    match s.get("interval") {
                        Some(v) => d.u32(v, &s.path_of("interval"))?,
                        None => Curation::DEFAULT_SLIDESHOW_SECS,
                    }
                }
                None => Curation::DEFAULT_SLIDESHOW_SECS,
            };
            Curation::Slideshow { interval_secs }
        }
        "mini-dashboard" => {
            let columns = match n {
                Some(n) => {
                    let s = d.map(n, &p, &["columns"])?;
                    match s.get("columns") {
                        Some(v) => d.u32(v, &s.path_of("columns"))?,
                        None => Curation::DEFAULT_COLUMNS,
                    }
                }
                None => Curation::DEFAULT_COLUMNS,
            };
            Curation::MiniDashboard { columns }
        }
        "stack" => Curation::Stack,
        _ => Curation::Carousel,
    })
}

pub fn completeness(d: &mut Decoder, node: &Node, path: &str) -> R<Completeness> {
    let m = d.map(node, path, &["complete", "detect", "note"])?;
    let which = one_of(d, &m, &["complete", "detect"], "completeness")?;
    let note = m.get("note").map(|n| d.string(n, &m.path_of("note"))).transpose()?;
    let n = m.require(d, which)?;
    Ok(match which {
        "complete" => Completeness::Asserted {
            complete: d.bool(n, &m.path_of("complete"))?,
            note,
        },
        _ => Completeness::Detect {
            granularity: d.parsed(n, &m.path_of("detect"), "granularity")?,
            note,
        },
    })
}

pub fn update_policy(d: &mut Decoder, node: &Node, path: &str) -> R<UpdatePolicy> {
    if let Some(s) = node.as_scalar() {
        return match s.trim() {
            "manual-author" => Ok(UpdatePolicy::ManualAuthor),
            "manual-viewer" => Ok(UpdatePolicy::ManualViewer),
            other => Err(invalid(
                d,
                node,
                path,
                format!("{other:?} is not one of: manual-author, manual-viewer, auto-recur"),
            )),
        };
    }
    let m = d.map(node, path, &["auto-recur"])?;
    let n = m.require(d, "auto-recur")?;
    let p = m.path_of("auto-recur");
    let r = d.map(n, &p, &["period", "until", "publish-time"])?;
    Ok(UpdatePolicy::AutoRecur(RecurrenceRule {
        period: d.duration(r.require(d, "period")?, &r.path_of("period"))?,
        until: d.date(r.require(d, "until")?, &r.path_of("until"))?,
        publish_time: d.time(r.require(d, "publish-time")?, &r.path_of("publish-time"))?,
    }))
}

pub const SNAPSHOT_KEYS: [&str; 12] = [
    "spec-version",
    "id",
    "title",
    "components",
    "curation",
    "freshness",
    "completeness",
    "text-message",
    "update-policy",
    "created-at",
    "author",
    "version",
];

/// Decodes a snapshot. A missing `freshness` is inferred from the component time frames.
pub fn snapshot(d: &mut Decoder, node: &Node, path: &str) -> R<SnapshotSpec> {
    let m = d.map(node, path, &SNAPSHOT_KEYS)?;
    spec_version(d, &m)?;
    let components = d.list(m.require(d, "components")?, &m.path_of("components"), component)?;
    let freshness = match m.get("freshness") {
        Some(n) => d.date(n, &m.path_of("freshness"))?,
        None => crate::lifecycle::infer_freshness(&components).ok_or_else(|| {
            d.error(
                ViolationCode::MissingField,
                node.span,
                &m.path_of("freshness"),
                "freshness cannot be inferred without components",
            )
        })?,
    };
    let version = match m.get("version") {
        Some(n) => d.u32(n, &m.path_of("version"))?,
        None => 1,
    };
    Ok(SnapshotSpec {
        id: d.nonempty_string(m.require(d, "id")?, &m.path_of("id"))?,
        title: d.string(m.require(d, "title")?, &m.path_of("title"))?,
        components,
        curation: match m.get("curation") {
            Some(n) => curation(d, n, &m.path_of("curation"))?,
            None => Curation::Stack,
        },
        freshness,
        completeness: m
            .get("completeness")
            .map(|n| completeness(d, n, &m.path_of("completeness")))
            .transpose()?,
        text_message: m
            .get("text-message")
            .map(|n| d.string(n, &m.path_of("text-message")))
            .transpose()?,
        update_policy: match m.get("update-policy") {
            Some(n) => update_policy(d, n, &m.path_of("update-policy"))?,
            None => UpdatePolicy::ManualAuthor,
        },
        created_at: d.datetime(m.require(d, "created-at")?, &m.path_of("created-at"))?,
        author: d.nonempty_string(m.require(d, "author")?, &m.path_of("author"))?,
        version,
    })
}

fn spec_version(d: &Decoder, m: &MapReader) -> R<()> {
    if let Some(n) = m.get("spec-version") {
        let v = d.u32(n, &m.path_of("spec-version"))?;
        if v != SPEC_VERSION {
            return Err(d.error(
                ViolationCode::Unsupported,
                n.span,
                &m.path_of("spec-version"),
                format!("spec-version {v} is not supported (expected {SPEC_VERSION})"),
            ));
        }
    }
    Ok(())
}

pub fn selection(d: &mut Decoder, node: &Node, path: &str) -> R<DashboardSelection> {
    let m = d.map(
        node,
        path,
        &["panel-id", "worksheet", "data-source", "measures", "dimensions", "data-filters", "original-design"],
    )?;
    Ok(DashboardSelection {
        panel_id: d.nonempty_string(m.require(d, "panel-id")?, &m.path_of("panel-id"))?,
        worksheet: d.nonempty_string(m.require(d, "worksheet")?, &m.path_of("worksheet"))?,
        data_source: d.nonempty_string(m.require(d, "data-source")?, &m.path_of("data-source"))?,
        measures: opt_list(d, &m, "measures", measure)?,
        dimensions: opt_list(d, &m, "dimensions", dimension)?,
        data_filters: opt_list(d, &m, "data-filters", data_filter)?,
        original_design: original_design(d, m.require(d, "original-design")?, &m.path_of("original-design"))?,
    })
}

pub fn dashboard(d: &mut Decoder, node: &Node, path: &str) -> R<Dashboard> {
    let m = d.map(node, path, &["spec-version", "id", "title", "panels"])?;
    spec_version(d, &m)?;
    let panels_node = m.require(d, "panels")?;
    let panels = d.list(panels_node, &m.path_of("panels"), selection)?;
    for (i, p) in panels.iter().enumerate() {
        if panels[..i].iter().any(|q| q.panel_id == p.panel_id) {
            let at = panels_node.as_seq().map(|s| s[i].span).unwrap_or(panels_node.span);
            return Err(d.error(
                ViolationCode::DuplicatePanel,
                at,
                &super::decode::index(&m.path_of("panels"), i),
                format!("panel id {:?} used twice", p.panel_id),
            ));
        }
        if p.measures.is_empty() && p.dimensions.is_empty() {
            let at = panels_node.as_seq().map(|s| s[i].span).unwrap_or(panels_node.span);
            return Err(d.error(
                ViolationCode::NoFields,
                at,
                &super::decode::index(&m.path_of("panels"), i),
                format!("panel {:?} has no measures or dimensions", p.panel_id),
            ));
        }
    }
    Ok(Dashboard {
        id: d.nonempty_string(m.require(d, "id")?, &m.path_of("id"))?,
        title: m.get("title").map(|n| d.string(n, &m.path_of("title"))).transpose()?.unwrap_or_default(),
        panels,
    })
}
