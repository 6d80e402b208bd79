//! Generators shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::TestRunner;

use dashsnap_core::data::{Cell, Column, ColumnType, Table, Value};
use dashsnap_core::model::*;

pub fn date(s: &str) -> NaiveDate {
    s.parse().unwrap()
}

pub fn at(s: &str) -> NaiveDateTime {
    s.parse().unwrap()
}

/// Draws `n` values from `strategy` with a fixed seed.
pub fn sample<S: Strategy>(strategy: S, n: usize) -> Vec<S::Value> {
    let mut runner = TestRunner::deterministic();
    (0..n)
        .map(|_| strategy.new_tree(&mut runner).unwrap().current())
        .collect()
}

/// Free text, including characters that force quoting.
pub fn text() -> impl Strategy<Value = String> {
    prop_oneof![
        "[A-Za-z][A-Za-z0-9 _.-]{0,15}",
        "\\PC{1,16}".prop_filter("blank", |s| !s.trim().is_empty()),
        Just("yes".to_string()),
        Just("2022-03-02".to_string()),
        Just("a: b # c".to_string()),
        Just("\"quoted\" and \\back\\".to_string()),
        Just("line\nbreak\ttab".to_string()),
    ]
}

fn word() -> impl Strategy<Value = String> {
    "[A-Z][a-z]{1,6}( [A-Z][a-z]{1,5})?"
}

pub fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        (-4000i32..4000).prop_map(|n| n as f64 / 4.0),
        any::<f64>().prop_filter("finite", |f| f.is_finite()),
    ]
}

pub fn any_date() -> impl Strategy<Value = NaiveDate> {
    (2000i32..2030, 1u32..=12, 1u32..=31).prop_map(|(y, m, d)| {
        (0..4)
            .find_map(|back| NaiveDate::from_ymd_opt(y, m, d - back))
            .unwrap()
    })
}

pub fn unit() -> impl Strategy<Value = DurationUnit> {
    prop::sample::select(DurationUnit::ALL.to_vec())
}

pub fn duration() -> impl Strategy<Value = Duration> {
    (1u32..=6, unit()).prop_map(|(n, u)| Duration::new(n, u))
}

fn expr_over(names: Vec<String>) -> BoxedStrategy<Expr> {
    let leaf = prop_oneof![
        (0u32..400).prop_map(|n| Expr::Number(n as f64 / 4.0)),
        prop::sample::select(names).prop_map(Expr::Measure),
    ];
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (
                prop::sample::select(vec![BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div]),
                inner.clone(),
                inner
            )
                .prop_map(|(op, l, r)| Expr::Binary(op, Box::new(l), Box::new(r))),
        ]
    })
    .boxed()
}

/// 1-4 measures; computed ones only reference earlier measures, so there are no cycles.
pub fn measures() -> BoxedStrategy<Vec<Measure>> {
    (1usize..=4, prop::collection::vec(word(), 4))
        .prop_flat_map(|(n, words)| {
            let names: Vec<String> = words.iter().enumerate().take(n).map(|(i, w)| format!("{w} {i}")).collect();
            let per: Vec<BoxedStrategy<Measure>> = names
                .iter()
                .enumerate()
                .map(|(i, name)| {
                    let name = name.clone();
                    let unit = prop::option::of("[a-z$%]{1,3}");
                    let base = (word(), prop::option::of(prop::sample::select(Aggregate::ALL.to_vec())))
                        .prop_map(|(col, agg)| (col, agg));
                    if i == 0 {
                        (Just(name), base, unit)
                            .prop_map(|(name, (col, agg), unit)| base_measure(&name, &col, agg, unit))
                            .boxed()
                    } else {
                        let earlier = names[..i].to_vec();
                        prop_oneof![
                            (Just(name.clone()), base, unit.clone())
                                .prop_map(|(name, (col, agg), unit)| base_measure(&name, &col, agg, unit)),
                            (Just(name), expr_over(earlier), unit).prop_map(|(name, e, unit)| Measure {
                                unit,
                                ..Measure::computed(&name, e)
                            }),
                        ]
                        .boxed()
                    }
                })
                .collect();
            per
        })
        .boxed()
}

fn base_measure(name: &str, col: &str, agg: Option<Aggregate>, unit: Option<String>) -> Measure {
    let m = match agg {
        Some(a) => Measure::aggregated(name, col, a),
        None => Measure::column(name, col),
    };
    Measure { unit, ..m }
}

pub fn dimensions() -> impl Strategy<Value = Vec<Dimension>> {
    prop::collection::vec((word(), any::<bool>(), prop::option::of(word())), 0..=2).prop_map(|ds| {
        ds.into_iter()
            .enumerate()
            .map(|(i, (w, nominal, source))| {
                let name = format!("{w} d{i}");
                let mut d = if nominal {
                    Dimension::nominal(&name)
                } else {
                    Dimension::temporal(&name)
                };
                if let Some(s) = source {
                    d.source_column = s;
                }
                d
            })
            .collect()
    })
}

pub fn data_filter() -> impl Strategy<Value = DataFilter> {
    let column = text();
    let predicate = prop_oneof![
        text().prop_map(Predicate::Equals),
        prop::collection::vec(text(), 1..=3).prop_map(Predicate::OneOf),
        (finite(), finite()).prop_map(|(a, b)| Predicate::Range {
            min: a.min(b),
            max: a.max(b)
        }),
        (any_date(), 1u32..400).prop_map(|(start, days)| Predicate::DateRange {
            start,
            end: start + chrono::Duration::days(days as i64)
        }),
    ];
    (column, predicate).prop_map(|(column, predicate)| DataFilter { column, predicate })
}

pub fn time_frame() -> impl Strategy<Value = TimeFrame> {
    (word(), any_date(), duration()).prop_map(|(f, start, d)| TimeFrame::new(&f, start, d))
}

fn design(fields: Vec<String>) -> BoxedStrategy<OriginalDesign> {
    let pick = prop::sample::select(fields);
    let scale = (
        pick.clone(),
        prop::sample::select(ScaleType::ALL.to_vec()),
        prop::collection::vec(text(), 0..3),
        prop::collection::vec("#[0-9a-f]{6}", 0..3),
    )
        .prop_map(|(field, scale_type, domain, range)| Scale {
            field,
            scale_type,
            domain,
            range,
        });
    (
        prop::sample::select(Mark::ALL.to_vec()),
        prop::collection::btree_map(prop::sample::select(Channel::ALL.to_vec()), pick, 0..=3),
        prop::collection::vec(scale, 0..=2),
    )
        .prop_map(|(mark, encodings, scales)| OriginalDesign { mark, encodings, scales })
        .boxed()
}

fn param_value() -> impl Strategy<Value = ParamValue> {
    prop_oneof![
        finite().prop_map(ParamValue::Number),
        prop::collection::btree_map(text(), finite(), 0..3).prop_map(ParamValue::PerCategory),
        text().prop_map(ParamValue::Text),
    ]
}

fn binding() -> impl Strategy<Value = TemplateBinding> {
    (
        prop::sample::select(vec!["simple-breakdown", "breakdown-with-goal", "time-series-with-threshold"]),
        prop::collection::btree_map("[a-z][a-z-]{0,10}", param_value(), 0..3),
    )
        .prop_map(|(d, parameters)| TemplateBinding {
            design: TemplateId::new(d),
            parameters,
        })
}

fn annotation(nominal: bool) -> BoxedStrategy<Annotation> {
    let target = if nominal {
        prop_oneof![
            text().prop_map(AnnotationTarget::Category),
            finite().prop_map(AnnotationTarget::Threshold),
            text().prop_map(AnnotationTarget::Point),
        ]
        .boxed()
    } else {
        prop_oneof![
            finite().prop_map(AnnotationTarget::Threshold),
            text().prop_map(AnnotationTarget::Point),
        ]
        .boxed()
    };
    (prop::sample::select(AnnotationKind::ALL.to_vec()), target, prop::option::of(text()))
        .prop_map(|(kind, target, text)| Annotation { kind, target, text })
        .boxed()
}

fn interactive_filters() -> impl Strategy<Value = Vec<InteractiveFilter>> {
    let one = prop_oneof![
        (text(), prop::collection::vec(text(), 1..=3))
            .prop_map(|(column, values)| InteractiveFilter::Dropdown { column, values }),
        (text(), finite(), finite()).prop_map(|(column, a, b)| InteractiveFilter::Slider {
            column,
            min: a.min(b),
            max: a.max(b)
        }),
        (text(), prop::collection::vec(data_filter(), 1..=2))
            .prop_map(|(name, filters)| InteractiveFilter::Macro { name, filters }),
    ];
    prop::collection::vec(one, 0..=3).prop_map(|fs| {
        let mut keys = std::collections::BTreeSet::new();
        fs.into_iter()
            .filter(|f| {
                keys.insert(match f {
                    InteractiveFilter::Dropdown { column, .. } => format!("d:{column}"),
                    InteractiveFilter::Slider { column, .. } => format!("s:{column}"),
                    InteractiveFilter::Macro { name, .. } => format!("m:{name}"),
                })
            })
            .collect()
    })
}

/// Custom text without braces, or with one of the documented tokens.
fn custom_text() -> impl Strategy<Value = String> {
    prop_oneof![
        "[A-Za-z0-9 ,.!?'-]{1,24}",
        Just("Total {total} for {measure}".to_string()),
        Just("{value(East)} of {goal(East)} during {time-frame}".to_string()),
    ]
}

pub fn component(id: String) -> BoxedStrategy<ComponentSpec> {
    (measures(), dimensions())
        .prop_flat_map(move |(measures, dimensions)| {
            let fields: Vec<String> = measures
                .iter()
                .map(|m| m.name.clone())
                .chain(dimensions.iter().map(|d| d.name.clone()))
                .collect();
            let nominal = dimensions.iter().any(|d| d.kind == DimensionKind::Nominal);
            let head = (
                Just(id.clone()),
                prop::option::of(text()),
                prop::option::of(word()),
                "[a-z][a-z0-9_]{0,8}",
                prop::collection::vec(data_filter(), 0..=2),
                Just(measures),
                Just(dimensions),
                time_frame(),
                design(fields),
            );
            let tail = (
                prop::option::of(binding()),
                any::<u8>(),
                prop::option::of(text()),
                prop::option::of(custom_text()),
                prop::collection::vec(annotation(nominal), 0..=2),
                interactive_filters(),
            );
            (head, tail)
        })
        .prop_map(
            |(
                (id, worksheet, panel, data_source, data_filters, measures, dimensions, time_frame, original_design),
                (template, look, caption, custom_text, annotations, interactive_filters),
            )| {
                let appearance = match (template.is_some(), look % 3) {
                    (_, 0) => Appearance::Both,
                    (true, 1) => Appearance::Text,
                    _ => Appearance::Visual,
                };
                ComponentSpec {
                    id,
                    worksheet,
                    panel,
                    data_source,
                    data_filters,
                    measures,
                    dimensions,
                    time_frame,
                    original_design,
                    appearance,
                    template,
                    caption,
                    custom_text,
                    annotations,
                    interactive_filters,
                }
            },
        )
        .boxed()
}

fn curation() -> impl Strategy<Value = Curation> {
    prop_oneof![
        Just(Curation::Stack),
        Just(Curation::Carousel),
        (1u32..120).prop_map(|interval_secs| Curation::Slideshow { interval_secs }),
        (1u32..6).prop_map(|columns| Curation::MiniDashboard { columns }),
    ]
}

fn completeness() -> impl Strategy<Value = Completeness> {
    prop_oneof![
        (any::<bool>(), prop::option::of(text())).prop_map(|(complete, note)| Completeness::Asserted { complete, note }),
        (unit(), prop::option::of(text())).prop_map(|(granularity, note)| Completeness::Detect { granularity, note }),
    ]
}

fn created_at() -> impl Strategy<Value = NaiveDateTime> {
    (any_date(), 0u32..24, 0u32..60, 0u32..60)
        .prop_map(|(d, h, m, s)| d.and_time(NaiveTime::from_hms_opt(h, m, s).unwrap()))
}

fn policy(created: NaiveDate) -> BoxedStrategy<UpdatePolicy> {
    prop_oneof![
        Just(UpdatePolicy::ManualAuthor),
        Just(UpdatePolicy::ManualViewer),
        (duration(), 1i64..800, 0u32..24, prop::sample::select(vec![0u32, 0, 30, 59]), prop::sample::select(vec![0u32, 0, 15]))
            .prop_map(move |(period, days, h, m, s)| UpdatePolicy::AutoRecur(RecurrenceRule {
                period,
                until: created + chrono::Duration::days(days),
                publish_time: NaiveTime::from_hms_opt(h, m, s).unwrap(),
            })),
    ]
    .boxed()
}

/// Structurally valid snapshot specs with 1-4 components.
pub fn snapshot() -> BoxedStrategy<SnapshotSpec> {
    (1usize..=4, "[a-z][a-z0-9-]{0,10}", created_at())
        .prop_flat_map(|(n, id, created)| {
            let components: Vec<BoxedStrategy<ComponentSpec>> =
                (0..n).map(|i| component(format!("{id}-c{i}"))).collect();
            (
                Just(id),
                text(),
                components,
                curation(),
                any_date(),
                prop::option::of(completeness()),
                prop::option::of(text()),
                policy(created.date()),
                Just(created),
                text(),
                1u32..6,
            )
        })
        .prop_map(
            |(id, title, components, curation, freshness, completeness, text_message, update_policy, created_at, author, version)| {
                SnapshotSpec {
                    id,
                    title,
                    components,
                    curation,
                    freshness,
                    completeness,
                    text_message,
                    update_policy,
                    created_at,
                    author,
                    version,
                }
            },
        )
        .boxed()
}

/// A random table for the aggregation oracle plus the measures and dimensions to
/// evaluate over it.
#[derive(Debug, Clone)]
pub struct OracleCase {
    pub table: Table,
    pub measures: Vec<Measure>,
    pub dims: Vec<Dimension>,
}

fn cell_number() -> impl Strategy<Value = Cell> {
    prop_oneof![
        1 => Just(None),
        8 => (-2000i32..2000).prop_map(|n| Some(Value::Number(n as f64 / 8.0))),
        1 => finite().prop_map(|f| Some(Value::Number(f.clamp(-1e12, 1e12)))),
    ]
}

fn cell_text() -> impl Strategy<Value = Cell> {
    prop_oneof![
        1 => Just(None),
        9 => prop::sample::select(vec!["East", "West", "North", "South", "Central"]).prop_map(|s| Some(Value::Text(s.into()))),
    ]
}

fn cell_date() -> impl Strategy<Value = Cell> {
    prop_oneof![
        1 => Just(None),
        9 => (0i64..20).prop_map(|d| Some(Value::Date(date("2022-03-01") + chrono::Duration::days(d)))),
    ]
}

/// Tables of up to 1,000 rows with 3 text/date columns and 4 number columns, grouped
/// by up to 3 dimensions and evaluated with up to 4 measures (some computed).
pub fn oracle_case() -> BoxedStrategy<OracleCase> {
    let columns = vec![
        Column { name: "Region".into(), ty: ColumnType::String },
        Column { name: "Segment".into(), ty: ColumnType::String },
        Column { name: "Day".into(), ty: ColumnType::Date },
        Column { name: "A".into(), ty: ColumnType::Number },
        Column { name: "B".into(), ty: ColumnType::Number },
        Column { name: "C".into(), ty: ColumnType::Number },
        Column { name: "D".into(), ty: ColumnType::Number },
    ];
    let row = (cell_text(), cell_text(), cell_date(), cell_number(), cell_number(), cell_number(), cell_number())
        .prop_map(|(a, b, c, d, e, f, g)| vec![a, b, c, d, e, f, g])
        .boxed();
    let rows = prop_oneof![
        1 => prop::collection::vec(row.clone(), 0..5),
        6 => prop::collection::vec(row, 5..=1000),
    ];
    let dims = prop::sample::subsequence(vec![0usize, 1, 2], 0..=3).prop_map(|idx| {
        idx.into_iter()
            .map(|i| match i {
                0 => Dimension::nominal("Region"),
                1 => Dimension::nominal("Segment"),
                _ => Dimension::temporal("Day"),
            })
            .collect::<Vec<_>>()
    });
    let base = (
        prop::sample::select(vec!["A", "B", "C", "D"]),
        prop::option::of(prop::sample::select(Aggregate::ALL.to_vec())),
    );
    let ms = (1usize..=4, prop::collection::vec(base, 4), prop::collection::vec(any::<bool>(), 4))
        .prop_flat_map(|(n, bases, computed)| {
            let names: Vec<String> = (0..n).map(|i| format!("m{i}")).collect();
            let per: Vec<BoxedStrategy<Measure>> = (0..n)
                .map(|i| {
                    let (col, agg) = bases[i];
                    let name = names[i].clone();
                    if i > 0 && computed[i] {
                        expr_over(names[..i].to_vec())
                            .prop_map(move |e| Measure::computed(&name, e))
                            .boxed()
                    } else {
                        Just(base_measure(&name, col, agg, None)).boxed()
                    }
                })
                .collect();
            per
        });
    (rows, dims, ms)
        .prop_map(move |(rows, dims, measures)| OracleCase {
            table: Table::new(columns.clone(), rows).unwrap(),
            measures,
            dims,
        })
        .boxed()
}

/// Parameters by name, for tests building bindings by hand.
pub fn params(entries: &[(&str, ParamValue)]) -> BTreeMap<String, ParamValue> {
    entries.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}
