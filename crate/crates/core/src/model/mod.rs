//! Domain types for dashboard selections, components, templates bindings and snapshots.

mod duration;
mod expr;
mod validate;

use std::collections::BTreeMap;
use std::fmt;

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};
use serde::{Deserialize, Serialize};

pub use duration::{Duration, DurationParseError, DurationUnit};
pub use expr::{is_identifier, BinOp, EvalOutcome, Expr, ExprError};
pub use validate::{
    validate_component, validate_component_structure, validate_selection, validate_snapshot, validate_snapshot_static,
    validate_structure, ColumnType,
    DataSourceSchema, SourceSpan, ValidationReport, Violation, ViolationCode,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregate {
    Sum,
    Avg,
    Min,
    Max,
    Count,
}

impl Aggregate {
    pub const ALL: [Aggregate; 5] = [
        Aggregate::Sum,
        Aggregate::Avg,
        Aggregate::Min,
        Aggregate::Max,
        Aggregate::Count,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Aggregate::Sum => "sum",
            Aggregate::Avg => "avg",
            Aggregate::Min => "min",
            Aggregate::Max => "max",
            Aggregate::Count => "count",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Aggregate::ALL.into_iter().find(|a| a.as_str() == s)
    }
}

/// How a measure traces back to the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", rename_all_fields = "kebab-case")]
pub enum MeasureKind {
    /// A raw column; summed when broken down by dimensions.
    Column { source_column: String },
    Aggregated {
        source_column: String,
        aggregate: Aggregate,
    },
    /// Evaluated over the already-aggregated values of other measures.
    Computed { expression: Expr },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measure {
    pub name: String,
    pub kind: MeasureKind,
    pub unit: Option<String>,
}

impl Measure {
    pub fn column(name: &str, source: &str) -> Self {
        Measure {
            name: name.into(),
            kind: MeasureKind::Column {
                source_column: source.into(),
            },
            unit: None,
        }
    }

    pub fn aggregated(name: &str, source: &str, aggregate: Aggregate) -> Self {
        Measure {
            name: name.into(),
            kind: MeasureKind::Aggregated {
                source_column: source.into(),
                aggregate,
            },
            unit: None,
        }
    }

    pub fn computed(name: &str, expression: Expr) -> Self {
        Measure {
            name: name.into(),
            kind: MeasureKind::Computed { expression },
            unit: None,
        }
    }

    pub fn source_column(&self) -> Option<&str> {
        match &self.kind {
            MeasureKind::Column { source_column } | MeasureKind::Aggregated { source_column, .. } => {
                Some(source_column)
            }
            MeasureKind::Computed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DimensionKind {
    Nominal,
    Temporal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Dimension {
    pub name: String,
    pub source_column: String,
    pub kind: DimensionKind,
}

impl Dimension {
    pub fn nominal(name: &str) -> Self {
        Dimension {
            name: name.into(),
            source_column: name.into(),
            kind: DimensionKind::Nominal,
        }
    }

    pub fn temporal(name: &str) -> Self {
        Dimension {
            name: name.into(),
            source_column: name.into(),
            kind: DimensionKind::Temporal,
        }
    }
}

/// Filter predicates. Scalar values are kept in their textual form and interpreted
/// against the column type when validated or applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Predicate {
    Equals(String),
    OneOf(Vec<String>),
    /// Inclusive on both ends.
    Range { min: f64, max: f64 },
    /// Half-open `[start, end)`, like time frames.
    DateRange { start: NaiveDate, end: NaiveDate },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataFilter {
    pub column: String,
    pub predicate: Predicate,
}

impl DataFilter {
    pub fn equals(column: &str, value: &str) -> Self {
        DataFilter {
            column: column.into(),
            predicate: Predicate::Equals(value.into()),
        }
    }

    pub fn range(column: &str, min: f64, max: f64) -> Self {
        DataFilter {
            column: column.into(),
            predicate: Predicate::Range { min, max },
        }
    }

    pub fn date_range(column: &str, start: NaiveDate, end: NaiveDate) -> Self {
        DataFilter {
            column: column.into(),
            predicate: Predicate::DateRange { start, end },
        }
    }
}

impl fmt::Display for DataFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.predicate {
            Predicate::Equals(v) => write!(f, "{} = {}", self.column, v),
            Predicate::OneOf(vs) => write!(f, "{} in {{{}}}", self.column, vs.join(", ")),
            Predicate::Range { min, max } => write!(f, "{} between {} and {}", self.column, min, max),
            Predicate::DateRange { start, end } => {
                write!(f, "{} from {} until {} (exclusive)", self.column, start, end)
            }
        }
    }
}

/// The temporal window of a component: `[start, start + duration)` on `field`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeFrame {
    pub field: String,
    pub start: NaiveDate,
    pub duration: Duration,
}

impl TimeFrame {
    pub fn new(field: &str, start: NaiveDate, duration: Duration) -> Self {
        TimeFrame {
            field: field.into(),
            start,
            duration,
        }
    }

    /// Exclusive end date. Falls back to `start` only on calendar overflow.
    pub fn end(&self) -> NaiveDate {
        self.duration.add_to(self.start).unwrap_or(self.start)
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date < self.end()
    }

    pub fn shifted_by(&self, period: Duration) -> Option<TimeFrame> {
        Some(TimeFrame {
            field: self.field.clone(),
            start: period.add_to(self.start)?,
            duration: self.duration,
        })
    }
}

impl fmt::Display for TimeFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} from {} by {} (until {})",
            self.duration,
            self.start,
            self.field,
            self.end()
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mark {
    Bar,
    Line,
    Area,
    Point,
    TextMetric,
}

impl Mark {
    pub const ALL: [Mark; 5] = [Mark::Bar, Mark::Line, Mark::Area, Mark::Point, Mark::TextMetric];

    pub fn as_str(self) -> &'static str {
        match self {
            Mark::Bar => "bar",
            Mark::Line => "line",
            Mark::Area => "area",
            Mark::Point => "point",
            Mark::TextMetric => "text-metric",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Mark::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Channel {
    X,
    Y,
    Color,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::X, Channel::Y, Channel::Color];

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::X => "x",
            Channel::Y => "y",
            Channel::Color => "color",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Channel::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleType {
    Linear,
    Log,
    Ordinal,
    Time,
}

impl ScaleType {
    pub const ALL: [ScaleType; 4] = [ScaleType::Linear, ScaleType::Log, ScaleType::Ordinal, ScaleType::Time];

    pub fn as_str(self) -> &'static str {
        match self {
            ScaleType::Linear => "linear",
            ScaleType::Log => "log",
            ScaleType::Ordinal => "ordinal",
            ScaleType::Time => "time",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        ScaleType::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Scale {
    pub field: String,
    pub scale_type: ScaleType,
    pub domain: Vec<String>,
    /// Output range; for color scales, the palette.
    pub range: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OriginalDesign {
    pub mark: Mark,
    pub encodings: BTreeMap<Channel, String>,
    pub scales: Vec<Scale>,
}

impl OriginalDesign {
    pub fn new(mark: Mark) -> Self {
        OriginalDesign {
            mark,
            encodings: BTreeMap::new(),
            scales: Vec::new(),
        }
    }

    pub fn encode(mut self, channel: Channel, field: &str) -> Self {
        self.encodings.insert(channel, field.into());
        self
    }

    pub fn color_scale(&self) -> Option<&Scale> {
        let field = self.encodings.get(&Channel::Color)?;
        self.scales.iter().find(|s| &s.field == field)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnnotationKind {
    Highlight,
    ReferenceLine,
    Note,
}

impl AnnotationKind {
    pub const ALL: [AnnotationKind; 3] = [AnnotationKind::Highlight, AnnotationKind::ReferenceLine, AnnotationKind::Note];

    pub fn as_str(self) -> &'static str {
        match self {
            AnnotationKind::Highlight => "highlight",
            AnnotationKind::ReferenceLine => "reference-line",
            AnnotationKind::Note => "note",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        AnnotationKind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnnotationTarget {
    /// A value of the component's nominal dimension.
    Category(String),
    /// A value on the measure axis.
    Threshold(f64),
    /// A single group, identified by its key values joined with `/`.
    Point(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub kind: AnnotationKind,
    pub target: AnnotationTarget,
    pub text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InteractiveFilter {
    Dropdown { column: String, values: Vec<String> },
    Slider { column: String, min: f64, max: f64 },
    Macro { name: String, filters: Vec<DataFilter> },
}

impl InteractiveFilter {
    pub fn column(&self) -> Option<&str> {
        match self {
            InteractiveFilter::Dropdown { column, .. } | InteractiveFilter::Slider { column, .. } => Some(column),
            InteractiveFilter::Macro { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Appearance {
    Visual,
    Text,
    Both,
}

impl Appearance {
    pub fn as_str(self) -> &'static str {
        match self {
            Appearance::Visual => "visual",
            Appearance::Text => "text",
            Appearance::Both => "both",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Appearance::Visual, Appearance::Text, Appearance::Both]
            .into_iter()
            .find(|a| a.as_str() == s)
    }

    pub fn has_visual(self) -> bool {
        matches!(self, Appearance::Visual | Appearance::Both)
    }

    pub fn has_text(self) -> bool {
        matches!(self, Appearance::Text | Appearance::Both)
    }
}

/// Identifier of a template in the catalog.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TemplateId(pub String);

impl TemplateId {
    pub fn new(s: &str) -> Self {
        TemplateId(s.to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamValue {
    Number(f64),
    PerCategory(BTreeMap<String, f64>),
    Text(String),
}

/// A component's choice of template design plus the analyst-supplied parameter values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateBinding {
    pub design: TemplateId,
    pub parameters: BTreeMap<String, ParamValue>,
}

/// The mediation object between a component and a template design.
///
/// Everything except `parameters` is copied from the component and its original design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct TemplateConfig {
    pub design: TemplateId,
    pub measures: Vec<Measure>,
    pub dimensions: Vec<Dimension>,
    pub time_frame: TimeFrame,
    pub data_filters: Vec<DataFilter>,
    pub scales: Vec<Scale>,
    pub parameters: BTreeMap<String, ParamValue>,
}

impl TemplateConfig {
    pub fn number_param(&self, name: &str) -> Option<f64> {
        match self.parameters.get(name)? {
            ParamValue::Number(n) => Some(*n),
            _ => None,
        }
    }

    pub fn per_category_param(&self, name: &str) -> Option<&BTreeMap<String, f64>> {
        match self.parameters.get(name)? {
            ParamValue::PerCategory(m) => Some(m),
            _ => None,
        }
    }

    pub fn nominal_dimension(&self) -> Option<&Dimension> {
        self.dimensions.iter().find(|d| d.kind == DimensionKind::Nominal)
    }

    pub fn temporal_dimension(&self) -> Option<&Dimension> {
        self.dimensions.iter().find(|d| d.kind == DimensionKind::Temporal)
    }
}

/// A selected panel of a dashboard, as exported from the BI tool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct DashboardSelection {
    pub panel_id: String,
    pub worksheet: String,
    pub data_source: String,
    pub measures: Vec<Measure>,
    pub dimensions: Vec<Dimension>,
    pub data_filters: Vec<DataFilter>,
    pub original_design: OriginalDesign,
}

/// A dashboard descriptor: the panels an analyst can select from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dashboard {
    pub id: String,
    pub title: String,
    pub panels: Vec<DashboardSelection>,
}

impl Dashboard {
    pub fn panel(&self, panel_id: &str) -> Option<&DashboardSelection> {
        self.panels.iter().find(|p| p.panel_id == panel_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ComponentSpec {
    pub id: String,
    pub worksheet: Option<String>,
    pub panel: Option<String>,
    pub data_source: String,
    pub data_filters: Vec<DataFilter>,
    pub measures: Vec<Measure>,
    pub dimensions: Vec<Dimension>,
    pub time_frame: TimeFrame,
    pub original_design: OriginalDesign,
    pub appearance: Appearance,
    pub template: Option<TemplateBinding>,
    pub caption: Option<String>,
    /// Plain text or a `{token}` expression; replaces the template's text when set.
    pub custom_text: Option<String>,
    pub annotations: Vec<Annotation>,
    pub interactive_filters: Vec<InteractiveFilter>,
}

impl ComponentSpec {
    pub fn measure(&self, name: &str) -> Option<&Measure> {
        self.measures.iter().find(|m| m.name == name)
    }

    pub fn interactive_macro(&self, name: &str) -> Option<&[DataFilter]> {
        self.interactive_filters.iter().find_map(|f| match f {
            InteractiveFilter::Macro { name: n, filters } if n == name => Some(filters.as_slice()),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Curation {
    Stack,
    Carousel,
    Slideshow { interval_secs: u32 },
    MiniDashboard { columns: u32 },
}

impl Curation {
    pub const DEFAULT_SLIDESHOW_SECS: u32 = 5;
    pub const DEFAULT_COLUMNS: u32 = 2;

    pub fn slideshow() -> Self {
        Curation::Slideshow {
            interval_secs: Self::DEFAULT_SLIDESHOW_SECS,
        }
    }

    pub fn mini_dashboard() -> Self {
        Curation::MiniDashboard {
            columns: Self::DEFAULT_COLUMNS,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Curation::Stack => "stack",
            Curation::Carousel => "carousel",
            Curation::Slideshow { .. } => "slideshow",
            Curation::MiniDashboard { .. } => "mini-dashboard",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Completeness {
    /// Stated by the analyst.
    Asserted { complete: bool, note: Option<String> },
    /// Detected at materialization by bucketing each time frame at `granularity`.
    Detect {
        granularity: DurationUnit,
        note: Option<String>,
    },
}

impl Completeness {
    pub fn note(&self) -> Option<&str> {
        match self {
            Completeness::Asserted { note, .. } | Completeness::Detect { note, .. } => note.as_deref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct RecurrenceRule {
    pub period: Duration,
    pub until: NaiveDate,
    pub publish_time: NaiveTime,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdatePolicy {
    ManualAuthor,
    ManualViewer,
    AutoRecur(RecurrenceRule),
}

impl UpdatePolicy {
    pub fn recurrence(&self) -> Option<&RecurrenceRule> {
        match self {
            UpdatePolicy::AutoRecur(r) => Some(r),
            _ => None,
        }
    }
}

pub const SPEC_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SnapshotSpec {
    pub id: String,
    pub title: String,
    pub components: Vec<ComponentSpec>,
    pub curation: Curation,
    /// Best-before date; stale once the clock date is past it.
    pub freshness: NaiveDate,
    pub completeness: Option<Completeness>,
    pub text_message: Option<String>,
    pub update_policy: UpdatePolicy,
    pub created_at: NaiveDateTime,
    pub author: String,
    pub version: u32,
}

impl SnapshotSpec {
    pub fn component(&self, id: &str) -> Option<&ComponentSpec> {
        self.components.iter().find(|c| c.id == id)
    }

    pub fn is_stale(&self, today: NaiveDate) -> bool {
        is_stale(self.freshness, today)
    }
}

/// Staleness predicate: stale iff the date is strictly past the freshness date.
pub fn is_stale(freshness: NaiveDate, today: NaiveDate) -> bool {
    today > freshness
}
