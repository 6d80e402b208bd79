use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::catalog::{Catalog, SectionRepeat, TemplateDesign, VisualRecipe};
use super::svg::{n, Linear, Palette, Svg, BREACH_FILL, GOAL_FILL, INK};
use super::text::{check_text_expression, format_percent, format_value, parse_text, Segment};
use super::{mediate, TemplateError};
use crate::data::{ResultTable, Value};
use crate::model::{
    Annotation, AnnotationKind, AnnotationTarget, Appearance, Channel, ComponentSpec, DimensionKind, Mark,
    ParamValue, TemplateConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraints {
    pub width: u32,
    pub height: Option<u32>,
}

impl Default for Constraints {
    fn default() -> Self {
        Constraints {
            width: 480,
            height: None,
        }
    }
}

/// Widths below this drop tick labels and shrink the font one step.
pub const COMPACT_WIDTH: u32 = 360;
const FONT: u32 = 12;
const COMPACT_FONT: u32 = 10;
const ROW: f64 = 64.0;
const TS_WIDTH: f64 = 480.0;
const TS_HEIGHT: f64 = 240.0;
const NOTE_LINE: f64 = 18.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BadgeKind {
    NoData,
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RenderNode {
    SvgChart { svg: String, width: u32, height: u32 },
    CaptionText { text: String },
    Badge { badge: BadgeKind, text: String },
    Group { children: Vec<RenderNode> },
}

impl RenderNode {
    pub fn no_data() -> Self {
        RenderNode::Badge {
            badge: BadgeKind::NoData,
            text: "no data in time frame".into(),
        }
    }

    /// This node and all descendants, depth first.
    pub fn walk(&self) -> Vec<&RenderNode> {
        let mut out = vec![self];
        if let RenderNode::Group { children } = self {
            for c in children {
                out.extend(c.walk());
            }
        }
        out
    }

    pub fn svgs(&self) -> Vec<&str> {
        self.walk()
            .into_iter()
            .filter_map(|n| match n {
                RenderNode::SvgChart { svg, .. } => Some(svg.as_str()),
                _ => None,
            })
            .collect()
    }

    pub fn captions(&self) -> Vec<&str> {
        self.walk()
            .into_iter()
            .filter_map(|n| match n {
                RenderNode::CaptionText { text } => Some(text.as_str()),
                _ => None,
            })
            .collect()
    }

    pub fn badges(&self) -> Vec<(BadgeKind, &str)> {
        self.walk()
            .into_iter()
            .filter_map(|n| match n {
                RenderNode::Badge { badge, text } => Some((*badge, text.as_str())),
                _ => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RenderOptions<'a> {
    pub constraints: Constraints,
    /// Categories the per-category parameters must cover; `None` skips the check.
    pub categories: Option<&'a [String]>,
}

fn svg_node(svg: Svg) -> RenderNode {
    let (width, height) = (svg.width.round() as u32, svg.height.round() as u32);
    RenderNode::SvgChart {
        svg: svg.finish(),
        width,
        height,
    }
}

/// Key positions of the first nominal and first temporal dimension in the result.
struct Layout {
    measure: String,
    mi: usize,
    nominal: Option<usize>,
    temporal: Option<usize>,
}

impl Layout {
    fn of(cfg: &TemplateConfig, result: &ResultTable) -> Result<Self, TemplateError> {
        let measure = cfg
            .measures
            .first()
            .map(|m| m.name.clone())
            .ok_or_else(|| TemplateError::UnresolvedToken("measure".into()))?;
        let mi = result
            .measure_index(&measure)
            .ok_or_else(|| TemplateError::UnresolvedToken("measure".into()))?;
        let find = |kind| result.dimensions.iter().position(|d| d.kind == kind);
        Ok(Layout {
            measure,
            mi,
            nominal: find(DimensionKind::Nominal),
            temporal: find(DimensionKind::Temporal),
        })
    }

    /// Distinct categories (nominal keys) in result order.
    fn categories(&self, result: &ResultTable) -> Vec<String> {
        let Some(ni) = self.nominal else { return Vec::new() };
        let mut out: Vec<String> = Vec::new();
        for r in &result.rows {
            let k = r.keys[ni].to_string();
            if !out.contains(&k) {
                out.push(k);
            }
        }
        out
    }

    /// Values of one category (or all rows when `category` is `None`).
    fn values(&self, result: &ResultTable, category: Option<&str>) -> Vec<Option<f64>> {
        result
            .rows
            .iter()
            .filter(|r| match (category, self.nominal) {
                (Some(c), Some(ni)) => r.keys[ni].to_string() == c,
                _ => true,
            })
            .map(|r| r.values[self.mi])
            .collect()
    }

    fn value(&self, result: &ResultTable, category: &str) -> Option<f64> {
        let vals: Vec<f64> = self.values(result, Some(category)).into_iter().flatten().collect();
        (!vals.is_empty()).then(|| vals.iter().sum())
    }

    /// Series points sorted by date: (date, value) for non-null values.
    fn series(&self, result: &ResultTable, category: Option<&str>) -> Vec<(NaiveDate, f64)> {
        let Some(ti) = self.temporal else { return Vec::new() };
        let mut pts: Vec<(NaiveDate, f64)> = result
            .rows
            .iter()
            .filter(|r| match (category, self.nominal) {
                (Some(c), Some(ni)) => r.keys[ni].to_string() == c,
                _ => true,
            })
            .filter_map(|r| match (&r.keys[ti], r.values[self.mi]) {
                (Value::Date(d), Some(v)) => Some((*d, v)),
                _ => None,
            })
            .collect();
        pts.sort_by(|a, b| a.0.cmp(&b.0));
        pts
    }
}

fn opt_value(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), format_value)
}

fn last_day(cfg: &TemplateConfig) -> NaiveDate {
    let end = cfg.time_frame.end();
    end.pred_opt().unwrap_or(end).max(cfg.time_frame.start)
}

fn time_frame_text(cfg: &TemplateConfig) -> String {
    format!("{} from {}", cfg.time_frame.duration, cfg.time_frame.start)
}

struct TextCtx<'a> {
    cfg: &'a TemplateConfig,
    result: &'a ResultTable,
    layout: &'a Layout,
}

impl TextCtx<'_> {
    fn goal(&self, param: &str, category: &str) -> Option<f64> {
        self.cfg.per_category_param(param)?.get(category).copied()
    }

    fn all_values(&self) -> Vec<f64> {
        self.layout.values(self.result, None).into_iter().flatten().collect()
    }

    fn dimension(&self) -> Result<String, TemplateError> {
        self.cfg
            .nominal_dimension()
            .or_else(|| self.cfg.temporal_dimension())
            .map(|d| d.name.clone())
            .ok_or_else(|| TemplateError::UnresolvedToken("dimension".into()))
    }

    /// Resolves a catalog text-template token, optionally inside a per-category section.
    fn resolve(&self, name: &str, category: Option<&str>) -> Result<String, TemplateError> {
        let unresolved = || TemplateError::UnresolvedToken(name.to_string());
        let cat = || category.ok_or_else(unresolved);
        Ok(match name {
            "measure" => self.layout.measure.clone(),
            "dimension" => self.dimension()?,
            "category" => cat()?.to_string(),
            "value" => opt_value(self.layout.value(self.result, cat()?)),
            "total" => opt_value(self.result.total(&self.layout.measure)),
            "time-frame" => time_frame_text(self.cfg),
            "start" => self.cfg.time_frame.start.to_string(),
            "end" => last_day(self.cfg).to_string(),
            "for_category" => category.map(|c| format!(" for {c}")).unwrap_or_default(),
            "points" => self.all_values().len().to_string(),
            "change" => {
                let pts = self.layout.series(self.result, category);
                match (pts.first(), pts.last()) {
                    (Some((_, a)), Some((_, b))) if b > a => {
                        format!("rose from {} to {}", format_value(*a), format_value(*b))
                    }
                    (Some((_, a)), Some((_, b))) if b < a => {
                        format!("fell from {} to {}", format_value(*a), format_value(*b))
                    }
                    (Some((_, a)), Some(_)) => format!("stayed at {}", format_value(*a)),
                    _ => "had no data".into(),
                }
            }
            "pct_of_goal" => {
                let c = cat()?;
                match (self.layout.value(self.result, c), self.goal("goal", c)) {
                    (Some(v), Some(g)) if g != 0.0 => format_percent(v / g),
                    _ => "n/a".into(),
                }
            }
            "met" => {
                let c = cat()?;
                match (self.layout.value(self.result, c), self.goal("goal", c)) {
                    (Some(v), Some(g)) if v >= g => ", met".into(),
                    _ => String::new(),
                }
            }
            "pct_of_total_goal" => match (self.result.total(&self.layout.measure), self.cfg.number_param("total-goal")) {
                (Some(t), Some(g)) if g != 0.0 => format_percent(t / g),
                _ => "n/a".into(),
            },
            "above_upper" => {
                let u = self.cfg.number_param("upper-threshold").ok_or_else(unresolved)?;
                self.all_values().iter().filter(|v| **v > u).count().to_string()
            }
            "below_lower" => {
                let l = self.cfg.number_param("lower-threshold").ok_or_else(unresolved)?;
                self.all_values().iter().filter(|v| **v < l).count().to_string()
            }
            param => match self.cfg.parameters.get(param) {
                Some(ParamValue::Number(v)) => format_value(*v),
                Some(ParamValue::Text(t)) => t.clone(),
                Some(ParamValue::PerCategory(m)) => opt_value(m.get(cat()?).copied()),
                None => return Err(unresolved()),
            },
        })
    }

    fn fill(&self, text: &str, category: Option<&str>) -> Result<String, TemplateError> {
        let mut out = String::new();
        for seg in parse_text(text)? {
            match seg {
                Segment::Lit(l) => out.push_str(&l),
                Segment::Token { name, .. } => out.push_str(&self.resolve(&name, category)?),
            }
        }
        Ok(out)
    }
}

fn design_text(design: &TemplateDesign, cfg: &TemplateConfig, result: &ResultTable) -> Result<String, TemplateError> {
    let layout = Layout::of(cfg, result)?;
    let ctx = TextCtx {
        cfg,
        result,
        layout: &layout,
    };
    let categories = layout.categories(result);
    let mut sentences = Vec::new();
    for section in &design.text_template {
        if let Some(w) = &section.when {
            if !cfg.parameters.contains_key(w) {
                continue;
            }
        }
        match section.repeat {
            SectionRepeat::Once => sentences.push(ctx.fill(&section.text, None)?),
            SectionRepeat::Each if categories.is_empty() => sentences.push(ctx.fill(&section.text, None)?),
            SectionRepeat::Each => {
                for c in &categories {
                    sentences.push(ctx.fill(&section.text, Some(c))?);
                }
            }
        }
    }
    Ok(sentences.join(" "))
}

/// Substitutes `{token}`s in analyst-written text. Groups not in the result print `n/a`.
pub fn render_text_expression(
    expr: &str,
    cfg: &TemplateConfig,
    result: &ResultTable,
) -> Result<RenderNode, TemplateError> {
    let segments = check_text_expression(expr)?;
    let layout = Layout::of(cfg, result)?;
    let ctx = TextCtx {
        cfg,
        result,
        layout: &layout,
    };
    let mut out = String::new();
    for seg in segments {
        match seg {
            Segment::Lit(l) => out.push_str(&l),
            Segment::Token { name, arg } => {
                let group = arg.as_deref().unwrap_or_default();
                let text = match name.as_str() {
                    "measure" => layout.measure.clone(),
                    "dimension" => ctx.dimension()?,
                    "total" => opt_value(result.total(&layout.measure)),
                    "time-frame" => time_frame_text(cfg),
                    "value" => opt_value(result.value(group, &layout.measure)),
                    "goal" => opt_value(ctx.goal("goal", group)),
                    "pct_of_goal" => match (result.value(group, &layout.measure), ctx.goal("goal", group)) {
                        (Some(v), Some(g)) if g != 0.0 => format_percent(v / g),
                        _ => "n/a".into(),
                    },
                    other => return Err(TemplateError::UnresolvedToken(other.to_string())),
                };
                out.push_str(&text);
            }
        }
    }
    Ok(RenderNode::CaptionText { text: out })
}

fn note_lines(annotations: &[Annotation]) -> Vec<String> {
    annotations
        .iter()
        .filter_map(|a| {
            let text = a.text.as_deref()?;
            Some(match &a.target {
                AnnotationTarget::Category(c) => format!("{c}: {text}"),
                AnnotationTarget::Point(p) => format!("{p}: {text}"),
                AnnotationTarget::Threshold(t) => format!("{}: {text}", format_value(*t)),
            })
        })
        .collect()
}

fn draw_notes(svg: &mut Svg, notes: &[String], top: f64) {
    for (i, line) in notes.iter().enumerate() {
        svg.text("note", 8.0, top + NOTE_LINE * (i as f64 + 1.0) - 4.0, "start", line);
    }
}

fn thresholds(annotations: &[Annotation]) -> Vec<f64> {
    annotations
        .iter()
        .filter(|a| a.kind == AnnotationKind::ReferenceLine)
        .filter_map(|a| match a.target {
            AnnotationTarget::Threshold(t) => Some(t),
            _ => None,
        })
        .collect()
}

fn highlighted(annotations: &[Annotation], category: &str) -> bool {
    annotations
        .iter()
        .any(|a| a.kind == AnnotationKind::Highlight && a.target == AnnotationTarget::Category(category.to_string()))
}

fn bars_svg(
    cfg: &TemplateConfig,
    result: &ResultTable,
    goal_param: Option<&str>,
    annotations: &[Annotation],
) -> Result<Svg, TemplateError> {
    let layout = Layout::of(cfg, result)?;
    let categories = layout.categories(result);
    let goals = goal_param.and_then(|g| cfg.per_category_param(g));
    let dim = cfg.nominal_dimension().map(|d| d.name.clone()).unwrap_or_default();
    let palette = Palette::for_field(&cfg.scales, Some(&dim));
    let refs = thresholds(annotations);
    let notes = note_lines(annotations);

    let (left, right, top) = (120.0, 400.0, 28.0);
    let height = top + ROW * categories.len() as f64 + 8.0 + NOTE_LINE * notes.len() as f64;
    let mut svg = Svg::new(TS_WIDTH, height, FONT);
    let values: Vec<Option<f64>> = categories.iter().map(|c| layout.value(result, c)).collect();
    let goal_of = |c: &str| goals.and_then(|g| g.get(c).copied());
    let domain = values
        .iter()
        .flatten()
        .copied()
        .chain(categories.iter().filter_map(|c| goal_of(c)))
        .chain(refs.iter().copied());
    let x = Linear::including_zero(domain, left, right);

    svg.text("title", 8.0, 18.0, "start", &format!("{} by {dim}", layout.measure));
    for (i, (c, v)) in categories.iter().zip(&values).enumerate() {
        let y = top + ROW * i as f64;
        if let Some(g) = goal_of(c) {
            let (x0, x1) = (x.at(0.0).min(x.at(g)), x.at(0.0).max(x.at(g)));
            svg.rect("goal", x0, y + 12.0, x1 - x0, 40.0, GOAL_FILL, "");
        }
        let met = matches!((v, goal_of(c)), (Some(v), Some(g)) if *v >= g);
        let class = if met { "bar met" } else { "bar" };
        let val = v.unwrap_or(0.0);
        let (x0, x1) = (x.at(0.0).min(x.at(val)), x.at(0.0).max(x.at(val)));
        svg.rect(class, x0, y + 18.0, x1 - x0, 28.0, palette.color(c, i), "");
        if highlighted(annotations, c) {
            svg.rect("highlight", 2.0, y + 4.0, TS_WIDTH - 4.0, ROW - 8.0, "none", &format!(r#" stroke="{INK}" stroke-width="2""#));
        }
        svg.text("category", left - 8.0, y + 36.0, "end", c);
        let mut label = opt_value(*v);
        if met {
            label.push_str(" met");
        }
        svg.text("value", x1.max(x.at(0.0)) + 6.0, y + 36.0, "start", &label);
    }
    let bottom = top + ROW * categories.len() as f64;
    for t in refs {
        svg.line("reference-line", x.at(t), top, x.at(t), bottom, INK, true);
    }
    draw_notes(&mut svg, &notes, bottom + 8.0);
    Ok(svg)
}

fn line_svg(
    cfg: &TemplateConfig,
    result: &ResultTable,
    upper: Option<f64>,
    lower: Option<f64>,
    annotations: &[Annotation],
) -> Result<Svg, TemplateError> {
    let layout = Layout::of(cfg, result)?;
    let categories = layout.categories(result);
    let series: Vec<Option<String>> = if categories.is_empty() {
        vec![None]
    } else {
        categories.iter().cloned().map(Some).collect()
    };
    let dim = cfg.nominal_dimension().map(|d| d.name.clone());
    let palette = Palette::for_field(&cfg.scales, dim.as_deref());
    let refs = thresholds(annotations);
    let notes = note_lines(annotations);

    let (l, r, t, b) = (56.0, 16.0, 28.0, 32.0);
    let height = TS_HEIGHT + NOTE_LINE * notes.len() as f64;
    let mut svg = Svg::new(TS_WIDTH, height, FONT);
    let start = cfg.time_frame.start;
    let span = (last_day(cfg) - start).num_days().max(1) as f64;
    let xa = |d: NaiveDate| l + (d - start).num_days() as f64 / span * (TS_WIDTH - l - r);
    let values = layout.values(result, None).into_iter().flatten();
    let y = Linear::including_zero(
        values.chain(upper).chain(lower).chain(refs.iter().copied()),
        TS_HEIGHT - b,
        t,
    );

    svg.text("title", 8.0, 18.0, "start", &format!("{} over time", layout.measure));
    svg.line("axis", l, TS_HEIGHT - b, TS_WIDTH - r, TS_HEIGHT - b, INK, false);
    svg.line("axis", l, t, l, TS_HEIGHT - b, INK, false);
    svg.text("tick", l - 6.0, y.at(y.lo) + 4.0, "end", &format_value(y.lo));
    svg.text("tick", l - 6.0, y.at(y.hi) + 4.0, "end", &format_value(y.hi));
    svg.text("tick", l, TS_HEIGHT - b + 16.0, "start", &start.to_string());
    svg.text("tick", TS_WIDTH - r, TS_HEIGHT - b + 16.0, "end", &last_day(cfg).to_string());

    for (label, value) in [("upper", upper), ("lower", lower)] {
        if let Some(v) = value {
            svg.line(&format!("threshold {label}"), l, y.at(v), TS_WIDTH - r, y.at(v), INK, true);
            svg.text("threshold-label", TS_WIDTH - r, y.at(v) - 4.0, "end", &format!("{label} {}", format_value(v)));
        }
    }
    for v in refs {
        svg.line("reference-line", l, y.at(v), TS_WIDTH - r, y.at(v), INK, true);
    }

    for (i, s) in series.iter().enumerate() {
        let pts = layout.series(result, s.as_deref());
        let color = s.as_deref().map_or(palette.first(), |c| palette.color(c, i));
        let coords: Vec<(f64, f64)> = pts.iter().map(|(d, v)| (xa(*d), y.at(*v))).collect();
        let emphasis = s
            .as_deref()
            .is_some_and(|c| highlighted(annotations, c))
            .then_some(r#" data-highlight="true""#)
            .unwrap_or("");
        svg.polyline("series", &coords, color, emphasis);
        for ((d, v), (cx, cy)) in pts.iter().zip(&coords) {
            let breach = upper.is_some_and(|u| *v > u) || lower.is_some_and(|lo| *v < lo);
            let pinned = annotations.iter().any(|a| a.target == AnnotationTarget::Point(d.to_string()));
            if breach {
                svg.circle("point breach", *cx, *cy, 5.0, BREACH_FILL);
            } else {
                svg.circle("point", *cx, *cy, 3.0, color);
            }
            if pinned {
                svg.raw(&format!(
                    "<circle class=\"annotation-point\" cx=\"{}\" cy=\"{}\" r=\"8\" fill=\"none\" stroke=\"{INK}\"/>\n",
                    n(*cx),
                    n(*cy)
                ));
            }
        }
        if let Some(c) = s {
            svg.text("legend", TS_WIDTH - r, t + 14.0 * (i as f64 + 1.0), "end", c);
        }
    }
    draw_notes(&mut svg, &notes, TS_HEIGHT);
    Ok(svg)
}

fn render_bound(
    design: &TemplateDesign,
    cfg: &TemplateConfig,
    result: &ResultTable,
    appearance: Appearance,
    custom_text: Option<&str>,
    annotations: &[Annotation],
) -> Result<RenderNode, TemplateError> {
    if result.is_empty() {
        return Ok(RenderNode::Group {
            children: vec![RenderNode::no_data()],
        });
    }
    let mut children = Vec::new();
    if appearance.has_visual() {
        let svg = match &design.visual {
            VisualRecipe::HorizontalBars { goal } => bars_svg(cfg, result, goal.as_deref(), annotations)?,
            VisualRecipe::Line { upper, lower } => line_svg(
                cfg,
                result,
                upper.as_deref().and_then(|p| cfg.number_param(p)),
                lower.as_deref().and_then(|p| cfg.number_param(p)),
                annotations,
            )?,
        };
        children.push(svg_node(svg));
    }
    if appearance.has_text() {
        children.push(match custom_text {
            Some(expr) => render_text_expression(expr, cfg, result)?,
            None => RenderNode::CaptionText {
                text: design_text(design, cfg, result)?,
            },
        });
    }
    Ok(RenderNode::Group { children })
}

/// Renders a template design: its SVG for `visual`, its text for `text`, both for `both`.
pub fn render_template(
    design: &TemplateDesign,
    cfg: &TemplateConfig,
    result: &ResultTable,
    appearance: Appearance,
) -> Result<RenderNode, TemplateError> {
    render_bound(design, cfg, result, appearance, None, &[])
}

fn field_dim(c: &ComponentSpec, result: &ResultTable, field: Option<&String>) -> Option<usize> {
    let f = field?;
    c.dimensions.iter().find(|d| &d.name == f)?;
    result.dimensions.iter().position(|d| &d.name == f)
}

/// Renders the component's own design with only responsive changes: below
/// [`COMPACT_WIDTH`] tick labels are dropped and the font shrinks one step.
pub fn render_original(c: &ComponentSpec, result: &ResultTable, constraints: Constraints) -> RenderNode {
    render_original_annotated(c, result, constraints, &c.annotations)
}

fn render_original_annotated(
    c: &ComponentSpec,
    result: &ResultTable,
    constraints: Constraints,
    annotations: &[Annotation],
) -> RenderNode {
    if result.is_empty() {
        return RenderNode::no_data();
    }
    let design = &c.original_design;
    let compact = constraints.width < COMPACT_WIDTH;
    let font = if compact { COMPACT_FONT } else { FONT };
    let notes = note_lines(annotations);
    let w = f64::from(constraints.width.max(120));
    let plot_h = constraints.height.map_or((w * 0.6).round(), f64::from).max(120.0);
    let h = plot_h + NOTE_LINE * notes.len() as f64;
    let mut svg = Svg::new(w, h, font);

    let enc = |ch: Channel| design.encodings.get(&ch);
    let measure = [enc(Channel::Y), enc(Channel::X)]
        .into_iter()
        .flatten()
        .find(|f| c.measure(f).is_some())
        .cloned()
        .or_else(|| c.measures.first().map(|m| m.name.clone()))
        .unwrap_or_default();
    let Some(mi) = result.measure_index(&measure) else {
        return RenderNode::Badge {
            badge: BadgeKind::Error,
            text: format!("measure {measure:?} missing from result"),
        };
    };
    let cat = field_dim(c, result, enc(Channel::X))
        .or_else(|| field_dim(c, result, enc(Channel::Y)))
        .or_else(|| (!result.dimensions.is_empty()).then_some(0));
    let color_dim = field_dim(c, result, enc(Channel::Color)).filter(|ci| Some(*ci) != cat);
    let color_field = color_dim
        .map(|i| result.dimensions[i].name.clone())
        .or_else(|| enc(Channel::Color).cloned());
    let palette = Palette::for_field(&design.scales, color_field.as_deref());

    let key = |r: &crate::data::ResultRow, i: Option<usize>| i.map(|i| r.keys[i].to_string()).unwrap_or_default();
    let mut bands: Vec<String> = Vec::new();
    let mut groups: Vec<String> = Vec::new();
    for r in &result.rows {
        let b = key(r, cat);
        if !bands.contains(&b) {
            bands.push(b);
        }
        let g = key(r, color_dim);
        if !groups.contains(&g) {
            groups.push(g);
        }
    }
    let (l, r, t, b) = (if compact { 8.0 } else { 48.0 }, 8.0, 24.0, if compact { 8.0 } else { 28.0 });
    let y = Linear::including_zero(
        result.rows.iter().filter_map(|row| row.values[mi]).chain(thresholds(annotations)),
        plot_h - b,
        t,
    );
    let band_w = (w - l - r) / bands.len().max(1) as f64;
    let band_of = |row: &crate::data::ResultRow| bands.iter().position(|x| *x == key(row, cat)).unwrap_or(0);
    let group_of = |row: &crate::data::ResultRow| groups.iter().position(|x| *x == key(row, color_dim)).unwrap_or(0);
    let color_of = |row: &crate::data::ResultRow| {
        let g = group_of(row);
        if color_dim.is_some() {
            palette.color(&groups[g], g).to_string()
        } else if color_field.is_some() && cat.is_some() {
            let bi = band_of(row);
            palette.color(&bands[bi], bi).to_string()
        } else {
            palette.first().to_string()
        }
    };
    let center = |row: &crate::data::ResultRow| l + band_w * (band_of(row) as f64 + 0.5);

    svg.text("title", 4.0, 16.0, "start", &match cat {
        Some(ci) => format!("{measure} by {}", result.dimensions[ci].name),
        None => measure.clone(),
    });

    match design.mark {
        Mark::Bar => {
            let sub = band_w * 0.8 / groups.len() as f64;
            for row in &result.rows {
                let v = row.values[mi].unwrap_or(0.0);
                let x0 = l + band_w * band_of(row) as f64 + band_w * 0.1 + sub * group_of(row) as f64;
                let (y0, y1) = (y.at(0.0).min(y.at(v)), y.at(0.0).max(y.at(v)));
                let class = if highlighted(annotations, &key(row, cat)) { "mark bar highlight" } else { "mark bar" };
                svg.rect(class, x0, y0, sub, y1 - y0, &color_of(row), "");
            }
        }
        Mark::Line | Mark::Area => {
            for (gi, g) in groups.iter().enumerate() {
                let rows: Vec<_> = result.rows.iter().filter(|row| key(row, color_dim) == *g).collect();
                let pts: Vec<(f64, f64)> = rows
                    .iter()
                    .filter_map(|row| row.values[mi].map(|v| (center(row), y.at(v))))
                    .collect();
                let color = match color_dim {
                    Some(_) => palette.color(g, gi).to_string(),
                    None => palette.first().to_string(),
                };
                if design.mark == Mark::Area {
                    let mut poly = pts.clone();
                    if let (Some(first), Some(last)) = (pts.first(), pts.last()) {
                        poly.push((last.0, y.at(0.0)));
                        poly.push((first.0, y.at(0.0)));
                    }
                    svg.polygon("mark area", &poly, &color);
                } else {
                    svg.polyline("mark line", &pts, &color, "");
                }
            }
        }
        Mark::Point => {
            for row in &result.rows {
                if let Some(v) = row.values[mi] {
                    svg.circle("mark point", center(row), y.at(v), 4.0, &color_of(row));
                }
            }
        }
        Mark::TextMetric => {
            if cat.is_none() {
                let v = result.total(&measure);
                svg.text("mark metric", w / 2.0, plot_h / 2.0, "middle", &opt_value(v));
            } else {
                for row in &result.rows {
                    svg.text("mark metric", center(row), plot_h / 2.0, "middle", &opt_value(row.values[mi]));
                }
            }
        }
    }

    for v in thresholds(annotations) {
        svg.line("reference-line", l, y.at(v), w - r, y.at(v), INK, true);
    }
    if design.mark != Mark::TextMetric {
        svg.line("axis", l, y.at(0.0), w - r, y.at(0.0), INK, false);
        if !compact {
            svg.text("tick", l - 4.0, y.at(y.hi) + 4.0, "end", &format_value(y.hi));
            svg.text("tick", l - 4.0, y.at(y.lo) + 4.0, "end", &format_value(y.lo));
            if cat.is_some() {
                for (i, band) in bands.iter().enumerate() {
                    svg.text("tick", l + band_w * (i as f64 + 0.5), plot_h - b + 16.0, "middle", band);
                }
            }
        }
    }
    if color_field.is_some() {
        let names = if color_dim.is_some() { &groups } else { &bands };
        for (i, name) in names.iter().enumerate() {
            let ly = t + 12.0 * i as f64;
            svg.rect("legend-swatch", w - r - 8.0, ly, 8.0, 8.0, palette.color(name, i), "");
            svg.text("legend", w - r - 12.0, ly + 8.0, "end", name);
        }
    }
    draw_notes(&mut svg, &notes, plot_h);
    svg_node(svg)
}

/// Renders a component as it should appear in a snapshot: the bound template (or the
/// original design), custom text in place of the template text, and the plain caption.
pub fn render_component(
    c: &ComponentSpec,
    catalog: &Catalog,
    result: &ResultTable,
    options: RenderOptions<'_>,
) -> Result<RenderNode, TemplateError> {
    let mut children = Vec::new();
    match &c.template {
        Some(binding) => {
            let design = catalog
                .get(&binding.design)
                .ok_or_else(|| TemplateError::UnknownTemplate(binding.design.to_string()))?;
            let cfg = mediate(c, design, &binding.parameters, options.categories)?;
            match render_bound(design, &cfg, result, c.appearance, c.custom_text.as_deref(), &c.annotations)? {
                RenderNode::Group { children: inner } => children.extend(inner),
                other => children.push(other),
            }
        }
        None => {
            children.push(render_original_annotated(c, result, options.constraints, &c.annotations));
            if let (Some(expr), true, false) = (&c.custom_text, c.appearance.has_text(), result.is_empty()) {
                let cfg = TemplateConfig {
                    design: crate::model::TemplateId::new("original"),
                    measures: c.measures.clone(),
                    dimensions: c.dimensions.clone(),
                    time_frame: c.time_frame.clone(),
                    data_filters: c.data_filters.clone(),
                    scales: c.original_design.scales.clone(),
                    parameters: BTreeMap::new(),
                };
                children.push(render_text_expression(expr, &cfg, result)?);
            }
        }
    }
    if let Some(caption) = &c.caption {
        children.push(RenderNode::CaptionText { text: caption.clone() });
    }
    Ok(RenderNode::Group { children })
}
