use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::*;
use crate::data::DataSourceRegistry;
use crate::template::{self, Catalog, ParamType, ShapeSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnType {
    Number,
    String,
    Date,
}

impl ColumnType {
    pub fn as_str(self) -> &'static str {
        match self {
            ColumnType::Number => "number",
            ColumnType::String => "string",
            ColumnType::Date => "date",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "number" => Some(ColumnType::Number),
            "string" => Some(ColumnType::String),
            "date" => Some(ColumnType::Date),
            _ => None,
        }
    }

    /// Whether `raw` can be read as a value of this type.
    pub fn accepts(self, raw: &str) -> bool {
        match self {
            ColumnType::Number => raw.trim().parse::<f64>().is_ok_and(f64::is_finite),
            ColumnType::String => true,
            ColumnType::Date => raw.trim().parse::<NaiveDate>().is_ok(),
        }
    }
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Column names and types of a data source.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DataSourceSchema {
    pub columns: Vec<(String, ColumnType)>,
}

impl DataSourceSchema {
    pub fn new(columns: &[(&str, ColumnType)]) -> Self {
        DataSourceSchema {
            columns: columns.iter().map(|(n, t)| (n.to_string(), *t)).collect(),
        }
    }

    pub fn column_type(&self, name: &str) -> Option<ColumnType> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, t)| *t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    NoComponents,
    DuplicateComponentId,
    UnknownDataSource,
    UnknownColumn,
    NoMeasures,
    NoFields,
    DuplicateMeasure,
    DuplicatePanel,
    AggregateType,
    UnknownMeasureRef,
    CyclicMeasureRef,
    DateColumnRequired,
    TemporalFieldRequired,
    InvalidTimeFrame,
    PredicateTypeMismatch,
    InvalidRange,
    UnknownEncodingField,
    UnknownScaleField,
    AppearanceRequiresVisual,
    UnknownTemplate,
    TemplateInapplicable,
    ParamMissing,
    ParamType,
    ParamUnknown,
    ParamCategoryGap,
    ParamUnknownCategory,
    UnknownToken,
    AnnotationTargetInvalid,
    EmptyDropdown,
    EmptyMacro,
    DuplicateFilter,
    InvalidCuration,
    RecurrencePeriodInvalid,
    RecurrenceHorizonInvalid,
    InvalidVersion,
    Syntax,
    UnknownKey,
    TypeMismatch,
    MissingField,
    InvalidValue,
    DuplicateKey,
    Unsupported,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        use ViolationCode::*;
        match self {
            NoComponents => "NO_COMPONENTS",
            DuplicateComponentId => "DUPLICATE_COMPONENT_ID",
            UnknownDataSource => "UNKNOWN_DATA_SOURCE",
            UnknownColumn => "UNKNOWN_COLUMN",
            NoMeasures => "NO_MEASURES",
            NoFields => "NO_FIELDS",
            DuplicateMeasure => "DUPLICATE_MEASURE",
            DuplicatePanel => "DUPLICATE_PANEL",
            AggregateType => "AGGREGATE_TYPE",
            UnknownMeasureRef => "UNKNOWN_MEASURE_REF",
            CyclicMeasureRef => "CYCLIC_MEASURE_REF",
            DateColumnRequired => "DATE_COLUMN_REQUIRED",
            TemporalFieldRequired => "TEMPORAL_FIELD_REQUIRED",
            InvalidTimeFrame => "INVALID_TIME_FRAME",
            PredicateTypeMismatch => "PREDICATE_TYPE_MISMATCH",
            InvalidRange => "INVALID_RANGE",
            UnknownEncodingField => "UNKNOWN_ENCODING_FIELD",
            UnknownScaleField => "UNKNOWN_SCALE_FIELD",
            AppearanceRequiresVisual => "APPEARANCE_REQUIRES_VISUAL",
            UnknownTemplate => "UNKNOWN_TEMPLATE",
            TemplateInapplicable => "TEMPLATE_INAPPLICABLE",
            ParamMissing => "PARAM_MISSING",
            ParamType => "PARAM_TYPE",
            ParamUnknown => "PARAM_UNKNOWN",
            ParamCategoryGap => "PARAM_CATEGORY_GAP",
            ParamUnknownCategory => "PARAM_UNKNOWN_CATEGORY",
            UnknownToken => "UNKNOWN_TOKEN",
            AnnotationTargetInvalid => "ANNOTATION_TARGET_INVALID",
            EmptyDropdown => "EMPTY_DROPDOWN",
            EmptyMacro => "EMPTY_MACRO",
            DuplicateFilter => "DUPLICATE_FILTER",
            InvalidCuration => "INVALID_CURATION",
            RecurrencePeriodInvalid => "RECURRENCE_PERIOD_INVALID",
            RecurrenceHorizonInvalid => "RECURRENCE_HORIZON_INVALID",
            InvalidVersion => "INVALID_VERSION",
            Syntax => "SYNTAX",
            UnknownKey => "UNKNOWN_KEY",
            TypeMismatch => "TYPE_MISMATCH",
            MissingField => "MISSING_FIELD",
            InvalidValue => "INVALID_VALUE",
            DuplicateKey => "DUPLICATE_KEY",
            Unsupported => "UNSUPPORTED",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Line/column position in a source document, both 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SourceSpan {
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    /// Dotted path into the YAML surface form, e.g. `components[0].time-frame`.
    pub path: String,
    pub message: String,
    pub span: Option<SourceSpan>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(span) = self.span {
            write!(f, "{}:{}: ", span.line, span.column)?;
        }
        write!(f, "{} at {}: {}", self.code, self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn codes(&self) -> Vec<ViolationCode> {
        self.violations.iter().map(|v| v.code).collect()
    }

    pub fn has(&self, code: ViolationCode) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }

    pub fn push(&mut self, code: ViolationCode, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            code,
            path: path.into(),
            message: message.into(),
            span: None,
        });
    }

    pub fn extend(&mut self, other: ValidationReport) {
        self.violations.extend(other.violations);
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

fn check_measures(
    measures: &[Measure],
    schema: &DataSourceSchema,
    path: &str,
    report: &mut ValidationReport,
) {
    for (i, m) in measures.iter().enumerate() {
        let mpath = format!("{path}.measures[{i}]");
        match &m.kind {
            MeasureKind::Column { source_column } => match schema.column_type(source_column) {
                None => report.push(
                    ViolationCode::UnknownColumn,
                    &mpath,
                    format!("column {source_column:?} not in data source"),
                ),
                Some(ColumnType::Number) => {}
                Some(t) => report.push(
                    ViolationCode::AggregateType,
                    &mpath,
                    format!("column measure {:?} needs a number column, {source_column:?} is {t}", m.name),
                ),
            },
            MeasureKind::Aggregated {
                source_column,
                aggregate,
            } => match schema.column_type(source_column) {
                None => report.push(
                    ViolationCode::UnknownColumn,
                    &mpath,
                    format!("column {source_column:?} not in data source"),
                ),
                Some(t) if t != ColumnType::Number && *aggregate != Aggregate::Count => report.push(
                    ViolationCode::AggregateType,
                    &mpath,
                    format!("{} of {t} column {source_column:?}", aggregate.as_str()),
                ),
                Some(_) => {}
            },
            MeasureKind::Computed { .. } => {}
        }
    }
}

/// Measure checks that need no schema: unique names, resolvable and acyclic references.
fn check_measure_refs(measures: &[Measure], path: &str, report: &mut ValidationReport) {
    let mut seen = BTreeSet::new();
    for (i, m) in measures.iter().enumerate() {
        let mpath = format!("{path}.measures[{i}]");
        if !seen.insert(m.name.as_str()) {
            report.push(ViolationCode::DuplicateMeasure, &mpath, format!("measure {:?} declared twice", m.name));
        }
        if let MeasureKind::Computed { expression } = &m.kind {
            for r in expression.references() {
                if !measures.iter().any(|o| o.name == r) {
                    report.push(
                        ViolationCode::UnknownMeasureRef,
                        &mpath,
                        format!("{:?} references undeclared measure {r:?}", m.name),
                    );
                }
            }
        }
    }
    for name in cyclic_measures(measures) {
        let i = measures.iter().position(|m| m.name == name).unwrap_or(0);
        report.push(
            ViolationCode::CyclicMeasureRef,
            format!("{path}.measures[{i}]"),
            format!("computed measure {name:?} depends on itself"),
        );
    }
}

/// Names of computed measures that sit on a reference cycle.
fn cyclic_measures(measures: &[Measure]) -> Vec<String> {
    let deps: BTreeMap<&str, Vec<&str>> = measures
        .iter()
        .map(|m| {
            let refs = match &m.kind {
                MeasureKind::Computed { expression } => expression.references().into_iter().collect(),
                _ => Vec::new(),
            };
            (m.name.as_str(), refs)
        })
        .collect();
    let mut out = Vec::new();
    for start in deps.keys() {
        // DFS looking for a path back to `start`.
        let mut stack: Vec<&str> = deps[start].clone();
        let mut visited = BTreeSet::new();
        while let Some(n) = stack.pop() {
            if n == *start {
                out.push(start.to_string());
                break;
            }
            if visited.insert(n) {
                if let Some(next) = deps.get(n) {
                    stack.extend(next.iter().copied());
                }
            }
        }
    }
    out
}

fn check_dimensions(dims: &[Dimension], schema: &DataSourceSchema, path: &str, report: &mut ValidationReport) {
    for (i, d) in dims.iter().enumerate() {
        let dpath = format!("{path}.dimensions[{i}]");
        match schema.column_type(&d.source_column) {
            None => report.push(
                ViolationCode::UnknownColumn,
                &dpath,
                format!("column {:?} not in data source", d.source_column),
            ),
            Some(t) if d.kind == DimensionKind::Temporal && t != ColumnType::Date => report.push(
                ViolationCode::DateColumnRequired,
                &dpath,
                format!("temporal dimension {:?} needs a date column, found {t}", d.name),
            ),
            Some(_) => {}
        }
    }
}

fn check_filter(f: &DataFilter, schema: &DataSourceSchema, path: &str, report: &mut ValidationReport) {
    let Some(ty) = schema.column_type(&f.column) else {
        report.push(
            ViolationCode::UnknownColumn,
            path,
            format!("filter column {:?} not in data source", f.column),
        );
        return;
    };
    let mismatch = |report: &mut ValidationReport, what: &str| {
        report.push(
            ViolationCode::PredicateTypeMismatch,
            path,
            format!("{what} does not match {ty} column {:?}", f.column),
        )
    };
    match &f.predicate {
        Predicate::Equals(v) => {
            if !ty.accepts(v) {
                mismatch(report, &format!("value {v:?}"));
            }
        }
        Predicate::OneOf(vs) => {
            if let Some(v) = vs.iter().find(|v| !ty.accepts(v)) {
                mismatch(report, &format!("value {v:?}"));
            }
        }
        Predicate::Range { .. } => {
            if ty != ColumnType::Number {
                mismatch(report, "numeric range");
            }
        }
        Predicate::DateRange { .. } => {
            if ty != ColumnType::Date {
                mismatch(report, "date range");
            }
        }
    }
}

fn check_design(design: &OriginalDesign, fields: &BTreeSet<&str>, path: &str, report: &mut ValidationReport) {
    for (channel, field) in &design.encodings {
        if !fields.contains(field.as_str()) {
            report.push(
                ViolationCode::UnknownEncodingField,
                format!("{path}.original-design.encodings.{}", channel.as_str()),
                format!("encoded field {field:?} is not a measure or dimension of the component"),
            );
        }
    }
    for (i, s) in design.scales.iter().enumerate() {
        if !fields.contains(s.field.as_str()) {
            report.push(
                ViolationCode::UnknownScaleField,
                format!("{path}.original-design.scales[{i}]"),
                format!("scale field {:?} is not a measure or dimension of the component", s.field),
            );
        }
    }
}

/// Checks a component against its data source's schema and the template catalog.
///
/// Validation never fails; an empty report means every invariant holds.
pub fn validate_component(c: &ComponentSpec, schema: &DataSourceSchema, catalog: &Catalog) -> ValidationReport {
    validate_component_at(c, schema, catalog, "component")
}

fn validate_component_at(c: &ComponentSpec, schema: &DataSourceSchema, catalog: &Catalog, path: &str) -> ValidationReport {
    let mut report = ValidationReport::default();
    check_measures(&c.measures, schema, path, &mut report);
    check_dimensions(&c.dimensions, schema, path, &mut report);
    for (i, f) in c.data_filters.iter().enumerate() {
        check_filter(f, schema, &format!("{path}.data-filters[{i}]"), &mut report);
    }
    let tf_path = format!("{path}.time-frame");
    match schema.column_type(&c.time_frame.field) {
        None => report.push(
            ViolationCode::UnknownColumn,
            &tf_path,
            format!("time frame field {:?} not in data source", c.time_frame.field),
        ),
        Some(ColumnType::Date) => {}
        Some(t) => report.push(
            ViolationCode::TemporalFieldRequired,
            &tf_path,
            format!("time frame field {:?} is a {t} column, not a date", c.time_frame.field),
        ),
    }

    check_component_shape(c, path, &mut report);

    if let Some(binding) = &c.template {
        check_template_binding(c, binding, catalog, &format!("{path}.template-config"), &mut report);
    }

    for (i, f) in c.interactive_filters.iter().enumerate() {
        let fpath = format!("{path}.interactive-filters[{i}]");
        match f {
            InteractiveFilter::Dropdown { column, values } => match schema.column_type(column) {
                None => report.push(ViolationCode::UnknownColumn, &fpath, format!("column {column:?} not in data source")),
                Some(t) => {
                    if let Some(v) = values.iter().find(|v| !t.accepts(v)) {
                        report.push(
                            ViolationCode::PredicateTypeMismatch,
                            &fpath,
                            format!("dropdown value {v:?} does not match {t} column {column:?}"),
                        );
                    }
                }
            },
            InteractiveFilter::Slider { column, .. } => match schema.column_type(column) {
                None => report.push(ViolationCode::UnknownColumn, &fpath, format!("column {column:?} not in data source")),
                Some(ColumnType::Number) => {}
                Some(t) => report.push(
                    ViolationCode::PredicateTypeMismatch,
                    &fpath,
                    format!("slider needs a number column, {column:?} is {t}"),
                ),
            },
            InteractiveFilter::Macro { filters, .. } => {
                for (j, mf) in filters.iter().enumerate() {
                    check_filter(mf, schema, &format!("{fpath}.filters[{j}]"), &mut report);
                }
            }
        }
    }
    report
}

/// Range bounds that can be checked without knowing the column type.
fn check_filter_bounds(f: &DataFilter, path: &str, report: &mut ValidationReport) {
    match &f.predicate {
        Predicate::Range { min, max } if min > max => {
            report.push(ViolationCode::InvalidRange, path, format!("range min {min} exceeds max {max}"))
        }
        Predicate::DateRange { start, end } if start >= end => {
            report.push(ViolationCode::InvalidRange, path, format!("date range {start}..{end} is empty"))
        }
        Predicate::OneOf(vs) if vs.is_empty() => {
            report.push(ViolationCode::InvalidRange, path, "one-of needs at least one value")
        }
        _ => {}
    }
}

fn check_not_blank(value: &str, path: String, report: &mut ValidationReport) {
    if value.trim().is_empty() {
        report.push(ViolationCode::InvalidValue, path, "must not be empty");
    }
}

fn check_filter_column(f: &DataFilter, path: &str, report: &mut ValidationReport) {
    check_not_blank(&f.column, format!("{path}.column"), report);
}

/// Every identifier the parser requires to be non-blank.
fn check_names(c: &ComponentSpec, path: &str, report: &mut ValidationReport) {
    check_not_blank(&c.id, format!("{path}.id"), report);
    check_not_blank(&c.data_source, format!("{path}.data-source"), report);
    for (i, m) in c.measures.iter().enumerate() {
        let mpath = format!("{path}.measures[{i}]");
        check_not_blank(&m.name, format!("{mpath}.name"), report);
        if let MeasureKind::Column { source_column } | MeasureKind::Aggregated { source_column, .. } = &m.kind {
            check_not_blank(source_column, format!("{mpath}.source-column"), report);
        }
    }
    for (i, d) in c.dimensions.iter().enumerate() {
        check_not_blank(&d.name, format!("{path}.dimensions[{i}].name"), report);
        check_not_blank(&d.source_column, format!("{path}.dimensions[{i}].source-column"), report);
    }
    for (i, f) in c.data_filters.iter().enumerate() {
        check_filter_column(f, &format!("{path}.data-filters[{i}]"), report);
    }
    check_not_blank(&c.time_frame.field, format!("{path}.time-frame.field"), report);
    for (i, sc) in c.original_design.scales.iter().enumerate() {
        check_not_blank(&sc.field, format!("{path}.original-design.scales[{i}].field"), report);
    }
    if let Some(t) = &c.template {
        check_not_blank(t.design.as_str(), format!("{path}.template-config.design"), report);
    }
    for (i, f) in c.interactive_filters.iter().enumerate() {
        let fpath = format!("{path}.interactive-filters[{i}]");
        match f {
            InteractiveFilter::Dropdown { column, .. } | InteractiveFilter::Slider { column, .. } => {
                check_not_blank(column, format!("{fpath}.column"), report)
            }
            InteractiveFilter::Macro { name, filters } => {
                check_not_blank(name, format!("{fpath}.name"), report);
                for (j, mf) in filters.iter().enumerate() {
                    check_filter_column(mf, &format!("{fpath}.filters[{j}]"), report);
                }
            }
        }
    }
}

/// Component invariants that hold regardless of data source or catalog.
fn check_component_shape(c: &ComponentSpec, path: &str, report: &mut ValidationReport) {
    check_names(c, path, report);
    if c.measures.is_empty() {
        report.push(ViolationCode::NoMeasures, format!("{path}.measures"), "a component needs at least one measure");
    }
    check_measure_refs(&c.measures, path, report);
    for (i, f) in c.data_filters.iter().enumerate() {
        check_filter_bounds(f, &format!("{path}.data-filters[{i}]"), report);
    }
    if c.time_frame.duration.count == 0 || c.time_frame.end() <= c.time_frame.start {
        report.push(
            ViolationCode::InvalidTimeFrame,
            format!("{path}.time-frame"),
            "time frame end is not after its start",
        );
    }

    let fields: BTreeSet<&str> = c
        .measures
        .iter()
        .map(|m| m.name.as_str())
        .chain(c.dimensions.iter().map(|d| d.name.as_str()))
        .collect();
    check_design(&c.original_design, &fields, path, report);

    if c.template.is_none() && !c.appearance.has_visual() {
        report.push(
            ViolationCode::AppearanceRequiresVisual,
            format!("{path}.appearance"),
            "without a template the original design must be shown (appearance visual or both)",
        );
    }

    if let Some(text) = &c.custom_text {
        if let Err(e) = template::check_text_expression(text) {
            report.push(ViolationCode::UnknownToken, format!("{path}.custom-text"), e.to_string());
        }
    }

    let has_nominal = c.dimensions.iter().any(|d| d.kind == DimensionKind::Nominal);
    for (i, a) in c.annotations.iter().enumerate() {
        if matches!(a.target, AnnotationTarget::Category(_)) && !has_nominal {
            report.push(
                ViolationCode::AnnotationTargetInvalid,
                format!("{path}.annotations[{i}]"),
                "category annotation on a component without a nominal dimension",
            );
        }
    }

    let mut filter_keys = BTreeSet::new();
    for (i, f) in c.interactive_filters.iter().enumerate() {
        let fpath = format!("{path}.interactive-filters[{i}]");
        let key = match f {
            InteractiveFilter::Dropdown { column, .. } => format!("dropdown:{column}"),
            InteractiveFilter::Slider { column, .. } => format!("slider:{column}"),
            InteractiveFilter::Macro { name, .. } => format!("macro:{name}"),
        };
        if !filter_keys.insert(key.clone()) {
            report.push(ViolationCode::DuplicateFilter, &fpath, format!("interactive filter {key} declared twice"));
        }
        match f {
            InteractiveFilter::Dropdown { values, .. } if values.is_empty() => {
                report.push(ViolationCode::EmptyDropdown, &fpath, "dropdown needs at least one allowed value")
            }
            InteractiveFilter::Slider { min, max, .. } if min > max => {
                report.push(ViolationCode::InvalidRange, &fpath, format!("slider min {min} exceeds max {max}"))
            }
            InteractiveFilter::Macro { filters, .. } => {
                if filters.is_empty() {
                    report.push(ViolationCode::EmptyMacro, &fpath, "macro needs at least one filter");
                }
                for (j, mf) in filters.iter().enumerate() {
                    check_filter_bounds(mf, &format!("{fpath}.filters[{j}]"), report);
                }
            }
            _ => {}
        }
    }
}

/// Every invariant checkable without a data source or template catalog.
/// The parser rejects documents for which this is non-empty.
pub fn validate_structure(s: &SnapshotSpec) -> ValidationReport {
    let mut report = validate_snapshot_static(s);
    for (i, c) in s.components.iter().enumerate() {
        check_component_shape(c, &format!("components[{i}]"), &mut report);
    }
    report
}

/// Component counterpart of [`validate_structure`]; paths are relative to the component.
pub fn validate_component_structure(c: &ComponentSpec) -> ValidationReport {
    let mut report = ValidationReport::default();
    check_component_shape(c, "component", &mut report);
    report
}

fn check_template_binding(
    c: &ComponentSpec,
    binding: &TemplateBinding,
    catalog: &Catalog,
    path: &str,
    report: &mut ValidationReport,
) {
    let Some(design) = catalog.get(&binding.design) else {
        report.push(
            ViolationCode::UnknownTemplate,
            format!("{path}.design"),
            format!("no template named {:?}", binding.design.as_str()),
        );
        return;
    };
    let shape = ShapeSummary::of_component(c, None);
    let unmet = design.requirements.unmet(&shape);
    if !unmet.is_empty() {
        report.push(
            ViolationCode::TemplateInapplicable,
            format!("{path}.design"),
            format!("{} does not fit this component: {}", design.id, unmet.join("; ")),
        );
    }
    for def in &design.parameters {
        match binding.parameters.get(&def.name) {
            None if def.required => report.push(
                ViolationCode::ParamMissing,
                format!("{path}.parameters"),
                format!("required parameter {:?} has no value", def.name),
            ),
            None => {}
            Some(v) if !def.ty.matches(v) => report.push(
                ViolationCode::ParamType,
                format!("{path}.parameters.{}", def.name),
                format!("parameter {:?} must be {}", def.name, def.ty.as_str()),
            ),
            Some(_) => {}
        }
    }
    for name in binding.parameters.keys() {
        if !design.parameters.iter().any(|d| &d.name == name) {
            report.push(
                ViolationCode::ParamUnknown,
                format!("{path}.parameters.{name}"),
                format!("{} declares no parameter {name:?}", design.id),
            );
        }
    }
}

/// Checks a dashboard panel against its source schema.
pub fn validate_selection(sel: &DashboardSelection, schema: &DataSourceSchema) -> ValidationReport {
    let path = format!("panels.{}", sel.panel_id);
    let mut report = ValidationReport::default();
    if sel.measures.is_empty() && sel.dimensions.is_empty() {
        report.push(ViolationCode::NoFields, &path, "a panel needs at least one measure or dimension");
    }
    check_measures(&sel.measures, schema, &path, &mut report);
    check_measure_refs(&sel.measures, &path, &mut report);
    check_dimensions(&sel.dimensions, schema, &path, &mut report);
    for (i, f) in sel.data_filters.iter().enumerate() {
        let fpath = format!("{path}.data-filters[{i}]");
        check_filter(f, schema, &fpath, &mut report);
        check_filter_bounds(f, &fpath, &mut report);
    }
    let fields: BTreeSet<&str> = sel
        .measures
        .iter()
        .map(|m| m.name.as_str())
        .chain(sel.dimensions.iter().map(|d| d.name.as_str()))
        .collect();
    check_design(&sel.original_design, &fields, &path, &mut report);
    report
}

/// Snapshot-level checks that need no data: component presence and uniqueness,
/// curation parameters, recurrence sanity.
pub fn validate_snapshot_static(s: &SnapshotSpec) -> ValidationReport {
    let mut report = ValidationReport::default();
    check_not_blank(&s.id, "id".into(), &mut report);
    check_not_blank(&s.author, "author".into(), &mut report);
    if s.components.is_empty() {
        report.push(ViolationCode::NoComponents, "components", "a snapshot needs at least one component");
    }
    let mut ids = BTreeSet::new();
    for (i, c) in s.components.iter().enumerate() {
        if !ids.insert(c.id.as_str()) {
            report.push(
                ViolationCode::DuplicateComponentId,
                format!("components[{i}].id"),
                format!("component id {:?} used twice", c.id),
            );
        }
    }
    match s.curation {
        Curation::Slideshow { interval_secs: 0 } => {
            report.push(ViolationCode::InvalidCuration, "curation", "slideshow interval must be at least 1 second")
        }
        Curation::MiniDashboard { columns: 0 } => {
            report.push(ViolationCode::InvalidCuration, "curation", "mini-dashboard needs at least 1 column")
        }
        _ => {}
    }
    if let UpdatePolicy::AutoRecur(rule) = &s.update_policy {
        if rule.period.count == 0 {
            report.push(
                ViolationCode::RecurrencePeriodInvalid,
                "update-policy.auto-recur.period",
                "recurrence period must be at least 1 unit",
            );
        }
        // Later versions are created by the recurrence itself, possibly on its last day.
        if s.version <= 1 && rule.until <= s.created_at.date() {
            report.push(
                ViolationCode::RecurrenceHorizonInvalid,
                "update-policy.auto-recur.until",
                format!("recurrence ends {} which is not after creation {}", rule.until, s.created_at),
            );
        }
    }
    if s.version == 0 {
        report.push(ViolationCode::InvalidVersion, "version", "versions start at 1");
    }
    report
}

/// Full snapshot validation: static checks, every component against its resolved
/// source, and per-category template parameters against the categories in the data.
pub fn validate_snapshot(s: &SnapshotSpec, registry: &DataSourceRegistry, catalog: &Catalog) -> ValidationReport {
    let mut report = validate_snapshot_static(s);
    for (i, c) in s.components.iter().enumerate() {
        let path = format!("components[{i}]");
        let table = match registry.resolve(&c.data_source) {
            Ok(t) => t,
            Err(e) => {
                report.push(ViolationCode::UnknownDataSource, format!("{path}.data-source"), e.to_string());
                continue;
            }
        };
        let component_report = validate_component_at(c, &table.schema(), catalog, &path);
        let clean = component_report.is_empty();
        report.extend(component_report);
        if clean {
            if let Some(binding) = &c.template {
                check_category_coverage(c, binding, &table, catalog, &path, &mut report);
            }
        }
    }
    report
}

fn check_category_coverage(
    c: &ComponentSpec,
    binding: &TemplateBinding,
    table: &crate::data::Table,
    catalog: &Catalog,
    path: &str,
    report: &mut ValidationReport,
) {
    let Some(design) = catalog.get(&binding.design) else { return };
    if !design.parameters.iter().any(|p| p.ty == ParamType::NumberPerCategory) {
        return;
    }
    let categories = match crate::data::component_categories(table, c) {
        Ok(cats) => cats,
        Err(_) => return,
    };
    if let Err(e) = template::mediate_config(c, design, &binding.parameters, &categories) {
        let code = match e {
            template::TemplateError::CategoryGap { .. } => ViolationCode::ParamCategoryGap,
            template::TemplateError::UnknownCategory { .. } => ViolationCode::ParamUnknownCategory,
            template::TemplateError::MissingParameter(_) => ViolationCode::ParamMissing,
            template::TemplateError::ParameterType { .. } => ViolationCode::ParamType,
            template::TemplateError::UnknownParameter(_) => ViolationCode::ParamUnknown,
            _ => ViolationCode::TemplateInapplicable,
        };
        report.push(code, format!("{path}.template-config.parameters"), e.to_string());
    }
}
