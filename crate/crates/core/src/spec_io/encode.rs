//! Canonical output. Specs are first lowered to an [`Out`] tree, which is then printed
//! as block YAML or converted to JSON.

use std::fmt::Write as _;

use crate::model::*;

#[derive(Debug, Clone, PartialEq)]
pub enum Out {
    /// Quoted only when a plain scalar would read back differently.
    Str(String),
    /// Always double-quoted.
    QStr(String),
    /// Emitted verbatim: dates, durations, keywords.
    Raw(String),
    Num(f64),
    Int(u64),
    Bool(bool),
    Seq(Vec<Out>),
    Map(Vec<(String, Out)>),
}

impl Out {
    fn is_scalar(&self) -> bool {
        !matches!(self, Out::Seq(_) | Out::Map(_))
    }
}

fn reserved(s: &str) -> bool {
    matches!(
        s.to_ascii_lowercase().as_str(),
        "true" | "false" | "null" | "yes" | "no" | "on" | "off" | "y" | "n" | "~"
    )
}

/// True when `s` can be written as a plain scalar in both block and flow context.
fn plain_ok(s: &str) -> bool {
    let mut chars = s.chars();
    let Some(first) = chars.next() else { return false };
    if !(first.is_alphabetic() || first == '_') || s.ends_with(' ') || reserved(s) {
        return false;
    }
    // The scanner reads a dash beside a space as an indicator inside flow sequences.
    if s.ends_with('-') || s.contains(" -") || s.contains("- ") {
        return false;
    }
    s.chars()
        .all(|c| c.is_alphanumeric() || matches!(c, ' ' | '_' | '-' | '.' | '/' | '(' | ')'))
}

pub fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if (c as u32) < 0x20 || c == '\u{7f}' || c == '\u{85}' || c == '\u{feff}' => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c if ('\u{2028}'..='\u{2029}').contains(&c) => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn scalar_text(o: &Out) -> String {
    match o {
        Out::Str(s) if plain_ok(s) => s.clone(),
        Out::Str(s) | Out::QStr(s) => quote(s),
        Out::Raw(s) => s.clone(),
        Out::Num(n) => format_number(*n),
        Out::Int(i) => i.to_string(),
        Out::Bool(b) => b.to_string(),
        Out::Seq(_) | Out::Map(_) => unreachable!("not a scalar"),
    }
}

/// Shortest text that parses back to the same `f64`.
pub fn format_number(n: f64) -> String {
    if n == 0.0 {
        return "0".into();
    }
    format!("{n}")
}

fn key_text(k: &str) -> String {
    if plain_ok(k) {
        k.to_string()
    } else {
        quote(k)
    }
}

fn flow_seq(items: &[Out]) -> String {
    let parts: Vec<String> = items.iter().map(scalar_text).collect();
    format!("[{}]", parts.join(", "))
}

fn write_map(out: &mut String, entries: &[(String, Out)], indent: usize) {
    for (k, v) in entries {
        out.push_str(&" ".repeat(indent));
        out.push_str(&key_text(k));
        out.push(':');
        write_value(out, v, indent);
    }
}

/// Writes the value after `key:` (or `-`), including the trailing newline.
fn write_value(out: &mut String, v: &Out, indent: usize) {
    match v {
        Out::Map(m) if m.is_empty() => out.push_str(" {}\n"),
        Out::Map(m) => {
            out.push('\n');
            write_map(out, m, indent + 2);
        }
        Out::Seq(items) if items.iter().all(Out::is_scalar) => {
            out.push(' ');
            out.push_str(&flow_seq(items));
            out.push('\n');
        }
        Out::Seq(items) => {
            out.push('\n');
            write_seq(out, items, indent + 2);
        }
        scalar => {
            out.push(' ');
            out.push_str(&scalar_text(scalar));
            out.push('\n');
        }
    }
}

fn write_seq(out: &mut String, items: &[Out], indent: usize) {
    for item in items {
        out.push_str(&" ".repeat(indent));
        out.push('-');
        match item {
            Out::Map(m) if !m.is_empty() => {
                // First entry shares the dash line.
                let (k, v) = &m[0];
                out.push(' ');
                out.push_str(&key_text(k));
                out.push(':');
                write_value(out, v, indent + 2);
                write_map(out, &m[1..], indent + 2);
            }
            other => write_value(out, other, indent),
        }
    }
}

pub fn to_yaml(root: &Out) -> String {
    let mut out = String::new();
    match root {
        Out::Map(m) => write_map(&mut out, m, 0),
        Out::Seq(items) => write_seq(&mut out, items, 0),
        scalar => {
            out.push_str(&scalar_text(scalar));
            out.push('\n');
        }
    }
    out
}

pub fn to_json(root: &Out) -> serde_json::Value {
    use serde_json::Value as J;
    match root {
        Out::Str(s) | Out::QStr(s) | Out::Raw(s) => J::String(s.clone()),
        Out::Num(n) => serde_json::Number::from_f64(*n).map_or(J::Null, J::Number),
        Out::Int(i) => J::from(*i),
        Out::Bool(b) => J::Bool(*b),
        Out::Seq(items) => J::Array(items.iter().map(to_json).collect()),
        Out::Map(m) => J::Object(m.iter().map(|(k, v)| (k.clone(), to_json(v))).collect()),
    }
}

/// Builds a map, skipping `None` entries.
struct MapB(Vec<(String, Out)>);

impl MapB {
    fn new() -> Self {
        MapB(Vec::new())
    }

    fn put(mut self, k: &str, v: Out) -> Self {
        self.0.push((k.to_string(), v));
        self
    }

    fn opt(self, k: &str, v: Option<Out>) -> Self {
        match v {
            Some(v) => self.put(k, v),
            None => self,
        }
    }

    fn list(self, k: &str, v: Vec<Out>) -> Self {
        if v.is_empty() {
            self
        } else {
            self.put(k, Out::Seq(v))
        }
    }

    fn done(self) -> Out {
        Out::Map(self.0)
    }
}

fn s(v: &str) -> Out {
    Out::Str(v.to_string())
}

fn raw(v: impl ToString) -> Out {
    Out::Raw(v.to_string())
}

fn strs(vs: &[String]) -> Out {
    Out::Seq(vs.iter().map(|v| s(v)).collect())
}

pub fn format_datetime(dt: &chrono::NaiveDateTime) -> String {
    dt.format("%Y-%m-%dT%H:%M:%S%.f").to_string()
}

pub fn format_time(t: &chrono::NaiveTime) -> String {
    if t.format("%S").to_string() == "00" {
        t.format("%H:%M").to_string()
    } else {
        t.format("%H:%M:%S").to_string()
    }
}

pub fn measure(m: &Measure) -> Out {
    let b = MapB::new().put("name", s(&m.name));
    let b = match &m.kind {
        MeasureKind::Column { source_column } => b.put("kind", raw("column")).put("source-column", s(source_column)),
        MeasureKind::Aggregated {
            source_column,
            aggregate,
        } => b
            .put("kind", raw("aggregated"))
            .put("source-column", s(source_column))
            .put("aggregate", raw(aggregate.as_str())),
        MeasureKind::Computed { expression } => b.put("kind", raw("computed")).put("expression", s(&expression.to_string())),
    };
    b.opt("unit", m.unit.as_deref().map(s)).done()
}

pub fn dimension(d: &Dimension) -> Out {
    MapB::new()
        .put("name", s(&d.name))
        .opt("source-column", (d.source_column != d.name).then(|| s(&d.source_column)))
        .put(
            "kind",
            raw(match d.kind {
                DimensionKind::Nominal => "nominal",
                DimensionKind::Temporal => "temporal",
            }),
        )
        .done()
}

pub fn data_filter(f: &DataFilter) -> Out {
    let b = MapB::new().put("column", s(&f.column));
    match &f.predicate {
        Predicate::Equals(v) => b.put("equals", s(v)),
        Predicate::OneOf(vs) => b.put("one-of", strs(vs)),
        Predicate::Range { min, max } => b.put(
            "range",
            MapB::new().put("min", Out::Num(*min)).put("max", Out::Num(*max)).done(),
        ),
        Predicate::DateRange { start, end } => b.put(
            "date-range",
            MapB::new().put("start", raw(start)).put("end", raw(end)).done(),
        ),
    }
    .done()
}

pub fn time_frame(tf: &TimeFrame) -> Out {
    MapB::new()
        .put("field", s(&tf.field))
        .put("start", raw(tf.start))
        .put("duration", raw(tf.duration))
        .done()
}

pub fn original_design(d: &OriginalDesign) -> Out {
    let encodings: Vec<(String, Out)> = d
        .encodings
        .iter()
        .map(|(ch, f)| (ch.as_str().to_string(), s(f)))
        .collect();
    let scales = d
        .scales
        .iter()
        .map(|sc| {
            MapB::new()
                .put("field", s(&sc.field))
                .put("type", raw(sc.scale_type.as_str()))
                .list("domain", sc.domain.iter().map(|v| s(v)).collect())
                .list("range", sc.range.iter().map(|v| s(v)).collect())
                .done()
        })
        .collect();
    MapB::new()
        .put("mark", raw(d.mark.as_str()))
        .opt("encodings", (!encodings.is_empty()).then_some(Out::Map(encodings)))
        .list("scales", scales)
        .done()
}

pub fn annotation(a: &Annotation) -> Out {
    let b = MapB::new().put("kind", raw(a.kind.as_str()));
    let b = match &a.target {
        AnnotationTarget::Category(c) => b.put("category", s(c)),
        AnnotationTarget::Threshold(t) => b.put("threshold", Out::Num(*t)),
        AnnotationTarget::Point(p) => b.put("point", s(p)),
    };
    b.opt("text", a.text.as_deref().map(s)).done()
}

pub fn interactive_filter(f: &InteractiveFilter) -> Out {
    match f {
        InteractiveFilter::Dropdown { column, values } => MapB::new().put(
            "dropdown",
            MapB::new().put("column", s(column)).put("values", strs(values)).done(),
        ),
        InteractiveFilter::Slider { column, min, max } => MapB::new().put(
            "slider",
            MapB::new()
                .put("column", s(column))
                .put("min", Out::Num(*min))
                .put("max", Out::Num(*max))
                .done(),
        ),
        InteractiveFilter::Macro { name, filters } => MapB::new().put(
            "macro",
            MapB::new()
                .put("name", s(name))
                .put("filters", Out::Seq(filters.iter().map(data_filter).collect()))
                .done(),
        ),
    }
    .done()
}

pub fn param_value(v: &ParamValue) -> Out {
    match v {
        ParamValue::Number(n) => Out::Num(*n),
        ParamValue::PerCategory(m) => Out::Map(m.iter().map(|(k, v)| (k.clone(), Out::Num(*v))).collect()),
        ParamValue::Text(t) => Out::QStr(t.clone()),
    }
}

pub fn template_binding(b: &TemplateBinding) -> Out {
    let params: Vec<(String, Out)> = b.parameters.iter().map(|(k, v)| (k.clone(), param_value(v))).collect();
    MapB::new()
        .put("design", s(b.design.as_str()))
        .opt("parameters", (!params.is_empty()).then_some(Out::Map(params)))
        .done()
}

pub fn component(c: &ComponentSpec) -> Out {
    MapB::new()
        .put("id", s(&c.id))
        .opt("worksheet", c.worksheet.as_deref().map(s))
        .opt("panel", c.panel.as_deref().map(s))
        .put("data-source", s(&c.data_source))
        .list("data-filters", c.data_filters.iter().map(data_filter).collect())
        .put("measures", Out::Seq(c.measures.iter().map(measure).collect()))
        .list("dimensions", c.dimensions.iter().map(dimension).collect())
        .put("time-frame", time_frame(&c.time_frame))
        .put("original-design", original_design(&c.original_design))
        .put("appearance", raw(c.appearance.as_str()))
        .opt("template-config", c.template.as_ref().map(template_binding))
        .opt("caption", c.caption.as_deref().map(s))
        .opt("custom-text", c.custom_text.as_deref().map(s))
        .list("annotations", c.annotations.iter().map(annotation).collect())
        .list("interactive-filters", c.interactive_filters.iter().map(interactive_filter).collect())
        .done()
}

pub fn curation(c: &Curation) -> Out {
    match c {
        Curation::Stack | Curation::Carousel => raw(c.name()),
        Curation::Slideshow { interval_secs } => MapB::new()
            .put("slideshow", MapB::new().put("interval", Out::Int(u64::from(*interval_secs))).done())
            .done(),
        Curation::MiniDashboard { columns } => MapB::new()
            .put("mini-dashboard", MapB::new().put("columns", Out::Int(u64::from(*columns))).done())
            .done(),
    }
}

pub fn completeness(c: &Completeness) -> Out {
    let b = match c {
        Completeness::Asserted { complete, .. } => MapB::new().put("complete", Out::Bool(*complete)),
        Completeness::Detect { granularity, .. } => MapB::new().put("detect", raw(granularity.as_str())),
    };
    b.opt("note", c.note().map(s)).done()
}

pub fn update_policy(p: &UpdatePolicy) -> Out {
    match p {
        UpdatePolicy::ManualAuthor => raw("manual-author"),
        UpdatePolicy::ManualViewer => raw("manual-viewer"),
        UpdatePolicy::AutoRecur(r) => MapB::new()
            .put(
                "auto-recur",
                MapB::new()
                    .put("period", raw(r.period))
                    .put("until", raw(r.until))
                    .put("publish-time", Out::QStr(format_time(&r.publish_time)))
                    .done(),
            )
            .done(),
    }
}

pub fn snapshot(sn: &SnapshotSpec) -> Out {
    MapB::new()
        .put("spec-version", Out::Int(u64::from(SPEC_VERSION)))
        .put("id", s(&sn.id))
        .put("title", s(&sn.title))
        .put("components", Out::Seq(sn.components.iter().map(component).collect()))
        .put("curation", curation(&sn.curation))
        .put("freshness", raw(sn.freshness))
        .opt("completeness", sn.completeness.as_ref().map(completeness))
        .opt("text-message", sn.text_message.as_deref().map(s))
        .put("update-policy", update_policy(&sn.update_policy))
        .put("created-at", raw(format_datetime(&sn.created_at)))
        .put("author", s(&sn.author))
        .put("version", Out::Int(u64::from(sn.version)))
        .done()
}

pub fn selection(p: &DashboardSelection) -> Out {
    MapB::new()
        .put("panel-id", s(&p.panel_id))
        .put("worksheet", s(&p.worksheet))
        .put("data-source", s(&p.data_source))
        .list("measures", p.measures.iter().map(measure).collect())
        .list("dimensions", p.dimensions.iter().map(dimension).collect())
        .list("data-filters", p.data_filters.iter().map(data_filter).collect())
        .put("original-design", original_design(&p.original_design))
        .done()
}

pub fn dashboard(d: &Dashboard) -> Out {
    MapB::new()
        .put("spec-version", Out::Int(u64::from(SPEC_VERSION)))
        .put("id", s(&d.id))
        .put("title", s(&d.title))
        .put("panels", Out::Seq(d.panels.iter().map(selection).collect()))
        .done()
}
