//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits non-zero if
//! any fails. Set DASHSNAP_BLESS=1 to rewrite the golden render files.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration as Elapsed, Instant};

use chrono::{NaiveDate, NaiveDateTime};
use proptest::prelude::*;

use dashsnap_core::data::{
    apply_filters, apply_time_frame, evaluate, load_table, run_component_query, DataSourceRegistry, ResultTable, Table,
    Value,
};
use dashsnap_core::lifecycle::{
    infer_freshness, materialize, scheduler_tick, Clock, FixedClock, FreshnessBadge, SnapshotRender, SnapshotStore,
    VirtualClock,
};
use dashsnap_core::model::*;
use dashsnap_core::platform::{FilterRequest, MessageBody};
use dashsnap_core::scenario;
use dashsnap_core::spec_io::{parse_component, parse_dashboard, parse_snapshot, serialize_snapshot};
use dashsnap_core::store::{SourceRef, Store};
use dashsnap_core::template::{
    applicable_templates, format_value, parse_formatted, render_component, BadgeKind, Catalog, RenderNode,
    RenderOptions, ShapeSummary,
};
use dashsnap_core::workspace::Workspace;

use common::{at, date, sample};

const ROOT: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../..");

fn samples() -> PathBuf {
    Path::new(ROOT).join("samples")
}

fn sample_snapshot() -> SnapshotSpec {
    parse_snapshot(&std::fs::read_to_string(samples().join("snapshot.yaml")).unwrap()).unwrap()
}

fn sales_registry() -> DataSourceRegistry {
    let mut reg = DataSourceRegistry::new();
    reg.insert_csv("sales", samples().join("sales.csv"), None);
    reg
}

fn within(limit: Elapsed, started: Instant) -> Elapsed {
    let took = started.elapsed();
    assert!(took < limit, "took {took:?}, limit {limit:?}");
    took
}

// 1

fn spec_round_trip() -> String {
    let started = Instant::now();
    let specs = sample(common::snapshot(), 100);
    for s in &specs {
        let text = serialize_snapshot(s);
        let back = parse_snapshot(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
        assert_eq!(&back, s, "parse(serialize(s)) != s\n{text}");
        assert_eq!(serialize_snapshot(&back), text, "canonical form not idempotent");
    }
    let took = within(Elapsed::from_secs(5), started);
    format!("100 specs, parse(serialize(s)) == s and canonical form idempotent in {:.2}s (limit 5s)", took.as_secs_f64())
}

// 2

fn oracle_expr(e: &Expr, vals: &dyn Fn(&str) -> Option<f64>) -> Option<f64> {
    match e {
        Expr::Number(n) => Some(*n),
        Expr::Measure(m) => vals(m),
        Expr::Neg(x) => oracle_expr(x, vals).map(|v| -v),
        Expr::Binary(op, l, r) => {
            let (l, r) = (oracle_expr(l, vals)?, oracle_expr(r, vals)?);
            match op {
                BinOp::Add => Some(l + r),
                BinOp::Sub => Some(l - r),
                BinOp::Mul => Some(l * r),
                BinOp::Div if r == 0.0 => None,
                BinOp::Div => Some(l / r),
            }
        }
    }
}

/// Nested-loop grouping: distinct keys by linear search, then one pass over all rows
/// per group and measure.
fn oracle(t: &Table, measures: &[Measure], dims: &[Dimension]) -> Vec<(Vec<Value>, Vec<Option<f64>>)> {
    let col = |name: &str| t.columns().iter().position(|c| c.name == name).unwrap();
    let dim_cols: Vec<usize> = dims.iter().map(|d| col(&d.source_column)).collect();
    let key_of = |row: &[Option<Value>]| -> Option<Vec<Value>> { dim_cols.iter().map(|&i| row[i].clone()).collect() };
    let mut keys: Vec<Vec<Value>> = Vec::new();
    if dims.is_empty() {
        keys.push(Vec::new());
    }
    for row in t.rows() {
        if let Some(k) = key_of(row) {
            if !dims.is_empty() && !keys.contains(&k) {
                keys.push(k);
            }
        }
    }
    let mut out = Vec::new();
    for key in keys {
        let rows: Vec<&Vec<Option<Value>>> = t.rows().iter().filter(|r| key_of(r).as_ref() == Some(&key)).collect();
        let mut values: Vec<Option<f64>> = Vec::new();
        for m in measures {
            let v = match &m.kind {
                MeasureKind::Computed { expression } => {
                    let lookup = |name: &str| measures.iter().position(|o| o.name == name).and_then(|j| values[j]);
                    oracle_expr(expression, &lookup)
                }
                kind => {
                    let (source, agg) = match kind {
                        MeasureKind::Column { source_column } => (source_column, Aggregate::Sum),
                        MeasureKind::Aggregated { source_column, aggregate } => (source_column, *aggregate),
                        MeasureKind::Computed { .. } => unreachable!(),
                    };
                    let i = col(source);
                    let nums: Vec<f64> = rows.iter().filter_map(|r| r[i].as_ref().and_then(Value::as_f64)).collect();
                    let mut sum = 0.0;
                    for n in &nums {
                        sum += n;
                    }
                    match agg {
                        Aggregate::Count => Some(rows.len() as f64),
                        _ if nums.is_empty() => None,
                        Aggregate::Sum => Some(sum),
                        Aggregate::Avg => Some(sum / nums.len() as f64),
                        Aggregate::Min => nums.iter().copied().reduce(f64::min),
                        Aggregate::Max => nums.iter().copied().reduce(f64::max),
                    }
                }
            };
            values.push(v);
        }
        out.push((key, values));
    }
    out
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    a == b || (a - b).abs() <= rel * a.abs().max(b.abs())
}

fn aggregation_oracle() -> String {
    let started = Instant::now();
    let cases = sample(common::oracle_case(), 200);
    let (mut rows, mut groups) = (0, 0);
    for (n, case) in cases.iter().enumerate() {
        let got = evaluate(&case.table, &case.measures, &case.dims).unwrap();
        let want = oracle(&case.table, &case.measures, &case.dims);
        rows += case.table.len();
        groups += want.len();
        assert_eq!(got.rows.len(), want.len(), "case {n}: group count");
        for (key, values) in &want {
            let row = got.rows.iter().find(|r| &r.keys == key).unwrap_or_else(|| panic!("case {n}: missing group {key:?}"));
            for ((m, g), w) in case.measures.iter().zip(&row.values).zip(values) {
                let ok = match (g, w, &m.kind) {
                    (None, None, _) => true,
                    (Some(g), Some(w), MeasureKind::Aggregated { aggregate: Aggregate::Avg, .. }) => close(*g, *w, 1e-9),
                    (Some(g), Some(w), MeasureKind::Computed { .. }) => close(*g, *w, 1e-9),
                    (Some(g), Some(w), _) => g == w,
                    _ => false,
                };
                assert!(ok, "case {n}: measure {} of group {key:?}: got {g:?}, oracle {w:?}", m.name);
            }
        }
    }
    let took = within(Elapsed::from_secs(30), started);
    format!(
        "200 tables ({rows} rows, {groups} groups): sum/min/max/count exact, avg and computed within 1e-9 relative, {:.2}s (limit 30s)",
        took.as_secs_f64()
    )
}

// 3

fn end_by_hand(start: NaiveDate, d: Duration) -> NaiveDate {
    let months = |n: u32| start.checked_add_months(chrono::Months::new(n)).unwrap();
    match d.unit {
        DurationUnit::Day => start + chrono::Duration::days(d.count as i64),
        DurationUnit::Week => start + chrono::Duration::days(7 * d.count as i64),
        DurationUnit::Month => months(d.count),
        DurationUnit::Quarter => months(3 * d.count),
        DurationUnit::Year => months(12 * d.count),
    }
}

/// Latest end wins; on a tie the longest duration (the one reaching furthest past the end).
fn freshness_oracle(frames: &[(NaiveDate, Duration)]) -> NaiveDate {
    let ends: Vec<NaiveDate> = frames.iter().map(|(s, d)| end_by_hand(*s, *d)).collect();
    let latest = *ends.iter().max().unwrap();
    frames
        .iter()
        .zip(&ends)
        .filter(|(_, e)| **e == latest)
        .map(|((_, d), e)| end_by_hand(*e, *d))
        .max()
        .unwrap()
}

fn freshness_rule() -> String {
    let base = sample_snapshot().components[0].clone();
    let frame = (
        (0i64..12).prop_map(|d| date("2022-02-25") + chrono::Duration::days(d)),
        (1u32..=3, prop::sample::select(vec![DurationUnit::Day, DurationUnit::Week, DurationUnit::Month])),
    );
    let cases = sample(prop::collection::vec(frame, 2..=5), 100);
    let mut ties = 0;
    for frames in &cases {
        let frames: Vec<(NaiveDate, Duration)> = frames.iter().map(|(s, (n, u))| (*s, Duration::new(*n, *u))).collect();
        let components: Vec<ComponentSpec> = frames
            .iter()
            .enumerate()
            .map(|(i, (s, d))| ComponentSpec {
                id: format!("c{i}"),
                time_frame: TimeFrame::new("Order Date", *s, *d),
                ..base.clone()
            })
            .collect();
        let ends: Vec<NaiveDate> = frames.iter().map(|(s, d)| end_by_hand(*s, *d)).collect();
        let latest = ends.iter().max().unwrap();
        if ends.iter().filter(|e| *e == latest).count() > 1 {
            ties += 1;
        }
        assert_eq!(infer_freshness(&components), Some(freshness_oracle(&frames)), "{frames:?}");
    }
    assert!(ties > 0, "no tie cases were generated");
    let example = TimeFrame::new("Order Date", date("2022-03-02"), Duration::months(1));
    let got = infer_freshness(&[ComponentSpec {
        time_frame: example,
        ..base.clone()
    }]);
    assert_eq!(got, Some(date("2022-05-02")));
    let tie = [(date("2022-03-25"), Duration::weeks(1)), (date("2022-03-01"), Duration::months(1))];
    assert_eq!(freshness_oracle(&tie), date("2022-05-01"));
    let tie_components: Vec<ComponentSpec> = tie
        .iter()
        .enumerate()
        .map(|(i, (s, d))| ComponentSpec {
            id: format!("t{i}"),
            time_frame: TimeFrame::new("Order Date", *s, *d),
            ..base.clone()
        })
        .collect();
    assert_eq!(infer_freshness(&tie_components), Some(date("2022-05-01")));
    format!("100 snapshots ({ties} with tied end dates) match the oracle; 2022-03-02 + 1 month frame gives 2022-05-02")
}

// 4

fn recurring(mut s: SnapshotSpec, period: Duration, created: NaiveDateTime) -> SnapshotSpec {
    s.update_policy = UpdatePolicy::AutoRecur(RecurrenceRule {
        period,
        until: date("2024-12-31"),
        publish_time: "09:00:00".parse().unwrap(),
    });
    s.created_at = created;
    for c in &mut s.components {
        c.caption = Some("Analyst caption".into());
        c.custom_text = Some("Total {total} for {measure}".into());
    }
    s
}

/// Runs `k` ticks at each due instant; returns the frame starts seen after each tick.
fn run_ticks(s: SnapshotSpec, k: u32) -> Vec<Vec<NaiveDate>> {
    let reg = sales_registry();
    let catalog = Catalog::builtin();
    let clock = VirtualClock::new(s.created_at);
    let mut store = SnapshotStore::default();
    let id = s.id.clone();
    let render = materialize(&s, &reg, &catalog, &clock);
    store.record(s, render, clock.now());
    let mut seen = Vec::new();
    for i in 1..=k {
        let due = store.get(&id).unwrap().next_due().expect("recurrence still running");
        clock.set(due);
        let report = scheduler_tick(&mut store, &reg, &catalog, &clock);
        assert!(report.failures.is_empty(), "{:?}", report.failures);
        assert_eq!(report.updates.len(), 1, "tick {i} published {}", report.updates.len());
        let current = store.current(&id).unwrap().clone();
        assert_eq!(current.version, i + 1);
        for c in &current.components {
            assert!(c.annotations.is_empty(), "annotations kept in v{}", current.version);
            assert!(c.custom_text.is_none() && c.caption.is_none(), "free text kept in v{}", current.version);
        }
        let again = scheduler_tick(&mut store, &reg, &catalog, &clock);
        assert!(again.updates.is_empty() && again.failures.is_empty(), "repeated tick at {due} published");
        seen.push(current.components.iter().map(|c| c.time_frame.start).collect());
    }
    seen
}

fn recurrence() -> String {
    let base = sample_snapshot();
    let originals: Vec<NaiveDate> = base.components.iter().map(|c| c.time_frame.start).collect();
    for period in [Duration::weeks(1), Duration::weeks(2), Duration::months(1)] {
        let seen = run_ticks(recurring(base.clone(), period, at("2022-04-02T09:00:00")), 6);
        for (k, starts) in seen.iter().enumerate() {
            let k = k as u32 + 1;
            for (got, orig) in starts.iter().zip(&originals) {
                let mut want = *orig;
                for _ in 0..k {
                    want = period.add_to(want).unwrap();
                }
                if period.unit == DurationUnit::Week {
                    assert_eq!(want, *orig + chrono::Duration::days(7 * (period.count * k) as i64));
                }
                assert_eq!(*got, want, "{period} after {k} ticks");
            }
        }
    }
    let mut clamp = recurring(base.clone(), Duration::months(1), at("2022-01-31T09:00:00"));
    clamp.components.truncate(1);
    clamp.components[0].data_filters.clear();
    clamp.components[0].template = None;
    clamp.components[0].custom_text = None;
    clamp.components[0].time_frame.start = date("2022-01-31");
    let seen = run_ticks(clamp, 6);
    let starts: Vec<String> = seen.iter().take(2).map(|s| s[0].to_string()).collect();
    assert_eq!(starts, ["2022-02-28", "2022-03-28"]);
    assert_eq!(seen[5][0], date("2022-07-28"));
    "{1 week, 2 weeks, 1 month} x 6 ticks: frame starts advance one period per tick, versions +1, annotations and free text dropped, repeat tick idle; 2022-01-31 -> 2022-02-28 -> 2022-03-28".into()
}

// 5

struct DocRow {
    template: String,
    measures: (usize, usize),
    nominal: (usize, usize),
    temporal: (usize, usize),
    cap: usize,
    required: Vec<String>,
}

fn doc_table() -> Vec<DocRow> {
    let doc = std::fs::read_to_string(Path::new(ROOT).join("docs/templates.md")).unwrap();
    let body = doc
        .split("<!-- requirement-table -->")
        .nth(1)
        .and_then(|s| s.split("<!-- /requirement-table -->").next())
        .expect("requirement table markers");
    let range = |s: &str| match s.split_once('-') {
        Some((a, b)) => (a.parse().unwrap(), b.parse().unwrap()),
        None => (s.parse().unwrap(), s.parse().unwrap()),
    };
    body.lines()
        .filter(|l| l.starts_with('|'))
        .skip(2)
        .map(|l| {
            let cells: Vec<&str> = l.trim_matches('|').split('|').map(str::trim).collect();
            DocRow {
                template: cells[0].into(),
                measures: range(cells[1]),
                nominal: range(cells[2]),
                temporal: range(cells[3]),
                cap: cells[4].parse().unwrap(),
                required: match cells[5] {
                    "none" => Vec::new(),
                    r => r.split(", ").map(String::from).collect(),
                },
            }
        })
        .collect()
}

fn applicability_matrix() -> String {
    let table = doc_table();
    assert_eq!(table.len(), 3);
    let catalog = Catalog::builtin();
    let inside = |(lo, hi): (usize, usize), n: usize| lo <= n && n <= hi;
    let goal = common::params(&[("goal", ParamValue::PerCategory(BTreeMap::new()))]);
    let mut shapes = 0;
    let mut applicable = 0;
    for measures in 0..=3 {
        for nominal in 0..=2 {
            for temporal in 0..=2 {
                for categories in [None, Some(1), Some(12), Some(13)] {
                    let shape = ShapeSummary {
                        measures,
                        nominal,
                        temporal,
                        categories,
                    };
                    shapes += 1;
                    for supplied in [BTreeMap::new(), goal.clone()] {
                        let want: Vec<(String, Vec<String>)> = table
                            .iter()
                            .filter(|r| {
                                inside(r.measures, measures)
                                    && inside(r.nominal, nominal)
                                    && inside(r.temporal, temporal)
                                    && !(nominal > 0 && categories.is_some_and(|c| c > r.cap))
                            })
                            .map(|r| {
                                let missing = r.required.iter().filter(|p| !supplied.contains_key(*p)).cloned().collect();
                                (r.template.clone(), missing)
                            })
                            .collect();
                        let got: Vec<(String, Vec<String>)> = applicable_templates(&catalog, &shape, &supplied)
                            .into_iter()
                            .map(|a| (a.template.to_string(), a.missing))
                            .collect();
                        assert_eq!(got, want, "{shape:?} with {:?}", supplied.keys().collect::<Vec<_>>());
                        applicable += got.len();
                    }
                }
            }
        }
    }
    format!("{shapes} shapes x 2 parameter sets match the documented table ({applicable} applicable entries)")
}

// 6

const GOLDEN_ROWS: &str = "Order Date,Category,Sales\n\
2022-03-02,Furniture,10\n\
2022-03-09,Furniture,20\n\
2022-03-10,Technology,45\n\
2022-03-15,Office Supplies,12.5\n\
2022-03-20,Technology,5\n\
2022-04-03,Furniture,1000\n";

fn golden_component(dims: &str, design: &str, params: &str) -> ComponentSpec {
    parse_component(&format!(
        "id: golden
data-source: sales
measures:
  - name: Sales
    kind: aggregated
    source-column: Sales
    aggregate: sum
dimensions:
{dims}
time-frame:
  field: Order Date
  start: 2022-03-02
  duration: 1 month
original-design:
  mark: bar
appearance: both
template-config:
  design: {design}
  parameters: {params}
"
    ))
    .unwrap()
}

/// Numbers and dates in reading order. Percent signs are dropped.
fn numbers_in(text: &str) -> (Vec<f64>, Vec<NaiveDate>) {
    let (mut nums, mut dates) = (Vec::new(), Vec::new());
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let starts = chars[i].is_ascii_digit() || (chars[i] == '-' && chars.get(i + 1).is_some_and(char::is_ascii_digit));
        if !starts || (i > 0 && chars[i - 1].is_alphanumeric()) {
            i += 1;
            continue;
        }
        let mut j = i + 1;
        while j < chars.len() && (chars[j].is_ascii_digit() || matches!(chars[j], ',' | '.' | '-')) {
            j += 1;
        }
        let token: String = chars[i..j].iter().collect();
        let token = token.trim_end_matches(['.', ',']);
        match token.parse::<NaiveDate>() {
            Ok(d) => dates.push(d),
            Err(_) => nums.push(parse_formatted(token).unwrap_or_else(|| panic!("bad number {token:?} in {text:?}"))),
        }
        i = j;
    }
    (nums, dates)
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

fn check_golden(name: &str, node: &RenderNode) {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let svg = node.svgs().concat();
    let txt = node.captions().join("\n") + "\n";
    if std::env::var_os("DASHSNAP_BLESS").is_some() {
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join(format!("{name}.svg")), &svg).unwrap();
        std::fs::write(dir.join(format!("{name}.txt")), &txt).unwrap();
    }
    let read = |ext: &str| std::fs::read_to_string(dir.join(format!("{name}.{ext}"))).unwrap_or_default();
    assert_eq!(svg, read("svg"), "{name}.svg differs from golden");
    assert_eq!(txt, read("txt"), "{name}.txt differs from golden");
    roxmltree::Document::parse(&svg).unwrap();
}

fn render_golden(c: &ComponentSpec, table: &Table) -> (RenderNode, ResultTable) {
    let result = run_component_query(table, c, &[]).unwrap();
    let cats: Vec<String> = result.labels();
    let options = RenderOptions {
        categories: c.dimensions.iter().any(|d| d.kind == DimensionKind::Nominal).then_some(cats.as_slice()),
        ..RenderOptions::default()
    };
    let node = render_component(c, &Catalog::builtin(), &result, options).unwrap();
    (node, result)
}

fn template_rendering() -> String {
    let table = load_table(GOLDEN_ROWS.as_bytes(), None).unwrap();
    let nominal = "  - name: Category\n    kind: nominal";
    let temporal = "  - name: Order Date\n    kind: temporal";

    let simple = golden_component(nominal, "simple-breakdown", "{}");
    let (node, result) = render_golden(&simple, &table);
    check_golden("simple-breakdown", &node);
    let (nums, _) = numbers_in(node.captions()[0]);
    let want: Vec<f64> = result.rows.iter().map(|r| round2(r.values[0].unwrap())).collect();
    assert_eq!(nums, want);

    let goals = "{goal: {Furniture: 50, Office Supplies: 10, Technology: 40}, total-goal: 125}";
    let goal = golden_component(nominal, "breakdown-with-goal", goals);
    let (node, result) = render_golden(&goal, &table);
    check_golden("breakdown-with-goal", &node);
    let svg = roxmltree::Document::parse(node.svgs()[0]).unwrap().descendants().filter(|n| n.attribute("class") == Some("goal")).count();
    assert_eq!(svg, 3, "goal bars");
    let caption = node.captions()[0];
    assert!(caption.contains("Furniture: 30 (60% of goal 50)"), "{caption}");
    let goal_of: BTreeMap<&str, f64> = [("Furniture", 50.0), ("Office Supplies", 10.0), ("Technology", 40.0)].into();
    let mut want = Vec::new();
    for r in &result.rows {
        let (v, g) = (r.values[0].unwrap(), goal_of[r.label().as_str()]);
        want.extend([round2(v), (v / g * 100.0).round(), g]);
    }
    let total = result.total("Sales").unwrap();
    want.extend([round2(total), (total / 125.0 * 100.0).round(), 125.0]);
    assert_eq!(numbers_in(caption).0, want);

    let series = golden_component(temporal, "time-series-with-threshold", "{upper-threshold: 40}");
    let (node, result) = render_golden(&series, &table);
    check_golden("time-series-with-threshold", &node);
    let doc = roxmltree::Document::parse(node.svgs()[0]).unwrap();
    let rule = doc.descendants().find(|n| n.attribute("class") == Some("threshold upper")).expect("threshold rule");
    assert!(rule.attribute("stroke-dasharray").is_some(), "threshold rule is not dashed");
    let caption = node.captions()[0];
    let (nums, dates) = numbers_in(caption);
    assert_eq!(dates, [date("2022-03-02"), date("2022-04-01")]);
    let values: Vec<f64> = result.rows.iter().map(|r| r.values[0].unwrap()).collect();
    let above = values.iter().filter(|v| **v > 40.0).count() as f64;
    let want = vec![round2(values[0]), round2(*values.last().unwrap()), above, values.len() as f64, 40.0];
    assert_eq!(nums, want, "{caption}");
    "golden SVG and text match for 3 templates; goal bars, 30/50 -> 60%, dashed threshold rule; caption numbers equal the result table".into()
}

// 7

fn sample_workspace(clock: &dyn Clock) -> (Workspace, u64) {
    let mut ws = Workspace::from_store(Store::default(), samples());
    ws.add_source(
        "sales",
        SourceRef {
            path: "sales.csv".into(),
            schema: None,
        },
    );
    let dash = std::fs::read_to_string(samples().join("dashboard.yaml")).unwrap();
    ws.add_dashboard(parse_dashboard(&dash).unwrap());
    ws.add_channel("sales", "#sales", vec![]).unwrap();
    ws.add_snapshot(sample_snapshot(), clock).unwrap();
    let msg = ws.publish("march-sales", "sales", None, "analyst", clock).unwrap();
    (ws, msg)
}

fn filter_request() -> impl Strategy<Value = (&'static str, FilterRequest)> {
    let cat = prop::sample::select(vec!["Furniture", "Office Supplies", "Technology"]);
    prop_oneof![
        3 => cat.prop_map(|v| ("category-goals", FilterRequest::Dropdown { column: "Category".into(), value: v.into() })),
        1 => Just(("category-goals", FilterRequest::Clear { key: None })),
        1 => Just(("category-goals", FilterRequest::Clear { key: Some("dropdown:Category".into()) })),
        2 => Just(("region-profit", FilterRequest::Macro { name: "west-technology".into() })),
        2 => (1u32..=9, 1u32..=9).prop_map(|(a, b)| ("region-profit", FilterRequest::Slider {
            column: "Quantity".into(),
            min: a.min(b) as f64,
            max: a.max(b) as f64,
        })),
        1 => Just(("region-profit", FilterRequest::Clear { key: Some("slider:Quantity".into()) })),
        1 => Just(("region-profit", FilterRequest::Clear { key: None })),
    ]
}

fn view_bytes(ws: &Workspace, msg: u64, viewer: &str, clock: &dyn Clock) -> Vec<u8> {
    serde_json::to_vec(&ws.view(msg, viewer, clock).unwrap()).unwrap()
}

fn viewer_isolation() -> String {
    let clock = FixedClock(at("2022-04-02T09:00:00"));
    let (mut ws, msg) = sample_workspace(&clock);
    let request = FilterRequest::Dropdown {
        column: "Category".into(),
        value: "Technology".into(),
    };
    ws.apply_filter(msg, "category-goals", "bo", request).unwrap();
    let bo = view_bytes(&ws, msg, "bo", &clock);
    let table = ws.registry.resolve("sales").unwrap();
    let spec = ws.snapshot("march-sales", None).unwrap().clone();
    let c = spec.component("category-goals").unwrap();
    let sequences = sample(prop::collection::vec(filter_request(), 1..=8), 30);
    let (mut ops, mut checked) = (0, 0);
    for seq in sequences {
        ws.apply_filter(msg, "category-goals", "ana", FilterRequest::Clear { key: None }).ok();
        ws.apply_filter(msg, "region-profit", "ana", FilterRequest::Clear { key: None }).ok();
        for (component, request) in seq {
            ws.apply_filter(msg, component, "ana", request).unwrap();
            ops += 1;
            assert_eq!(view_bytes(&ws, msg, "bo", &clock), bo, "bo's view changed");

            let extra = ws
                .store
                .platform
                .viewer_state("ana", msg, "category-goals")
                .map(|s| s.data_filters())
                .unwrap_or_default();
            let mut filters = c.data_filters.clone();
            filters.extend(extra);
            let framed = apply_time_frame(&apply_filters(&table, &filters).unwrap(), &c.time_frame).unwrap();
            let want = evaluate(&framed, &c.measures, &c.dimensions).unwrap();
            let render = ws.view(msg, "ana", &clock).unwrap().render.unwrap();
            let node = &render.component("category-goals").unwrap().node;
            if want.is_empty() {
                assert!(node.badges().iter().any(|(b, _)| *b == BadgeKind::NoData));
                continue;
            }
            let caption = node.captions()[0];
            assert_eq!(caption.matches("of goal").count(), want.rows.len() + 1, "{caption}");
            for r in &want.rows {
                let expect = format!("{}: {} (", r.label(), format_value(r.values[0].unwrap()));
                assert!(caption.contains(&expect), "{expect:?} not in {caption:?}");
            }
            checked += 1;
        }
    }
    format!("30 random sequences ({ops} filter ops by ana): bo's view bytes unchanged; {checked} filtered captions match evaluate()")
}

// 8

fn staleness() -> String {
    let freshness = sample(common::any_date(), 100);
    for f in &freshness {
        let day = chrono::Duration::days(1);
        let probes = [
            ((*f - day).and_hms_opt(23, 59, 59).unwrap(), false),
            (f.and_hms_opt(0, 0, 0).unwrap(), false),
            (f.and_hms_opt(23, 59, 59).unwrap(), false),
            ((*f + day).and_hms_opt(0, 0, 0).unwrap(), true),
            ((*f + day * 30).and_hms_opt(12, 0, 0).unwrap(), true),
        ];
        for (now, stale) in probes {
            assert_eq!(is_stale(*f, now.date()), stale, "freshness {f} at {now}");
            assert_eq!(FreshnessBadge::at(*f, VirtualClock::new(now).today()).stale, stale);
        }
    }
    let clock = VirtualClock::new(at("2022-04-02T09:00:00"));
    let (ws, msg) = sample_workspace(&clock);
    let fresh_until = ws.snapshot("march-sales", None).unwrap().freshness;
    let mut flips = Vec::new();
    let mut last = false;
    while clock.today() <= date("2022-05-06") {
        let stale = ws.render("march-sales", None, &clock).unwrap().freshness_badge.stale;
        let seen = ws.view(msg, "bo", &clock).unwrap().render.unwrap().freshness_badge.stale;
        assert_eq!(stale, clock.today() > fresh_until, "render badge at {}", clock.now());
        assert_eq!(seen, stale, "message badge at {}", clock.now());
        if stale != last {
            flips.push(clock.today());
            last = stale;
        }
        clock.advance(chrono::Duration::hours(6));
    }
    assert_eq!(flips, [date("2022-05-03")]);
    format!("100 dates probed on both sides of midnight; virtual clock 04-02..05-06 flips to stale once, on 2022-05-03 (fresh until {fresh_until})")
}

// 9 and 10

fn scenario_replay() -> String {
    let started = Instant::now();
    let (report, ws) = scenario::run_file(&samples().join("scenario.yaml")).unwrap();
    assert!(report.passed, "{:?}", report.steps.iter().find(|s| !s.ok));
    let snaps: Vec<_> = ws
        .store
        .platform
        .messages
        .iter()
        .filter(|m| matches!(m.body, MessageBody::Snapshot { .. }))
        .collect();
    assert_eq!(snaps.len(), 2, "one post and one auto-update");
    let (root, reply) = (snaps[0], snaps[1]);
    assert_eq!(reply.thread_root, Some(root.id));
    assert_eq!(reply.snapshot_ref().map(|r| r.1), Some(2));
    assert_eq!(root.superseded_by, Some(reply.id));
    let entry = ws.store.snapshots.get("monthly-sales").unwrap();
    assert!(entry.version(1).unwrap().components.iter().any(|c| !c.annotations.is_empty()));
    assert!(entry.version(2).unwrap().components.iter().all(|c| c.annotations.is_empty()));
    let took = within(Elapsed::from_secs(10), started);
    format!(
        "{} steps pass: one auto-update posted as a thread reply, annotations stripped, v1 superseded, {:.3}s (limit 10s)",
        report.steps.len(),
        took.as_secs_f64()
    )
}

fn check_transparency(render: &SnapshotRender, spec: &SnapshotSpec, viewer_filtered: &[String]) {
    assert_eq!(render.layout.components.len(), spec.components.len());
    assert_eq!(render.transparency_block.len(), spec.components.len());
    for (cr, c) in render.layout.components.iter().zip(&spec.components) {
        assert_eq!(cr.component_id, c.id);
        let t = &cr.transparency;
        let filters: Vec<String> = c.data_filters.iter().map(ToString::to_string).collect();
        assert_eq!(t.filters, filters, "{}: data filters", c.id);
        let tf = &c.time_frame;
        let last = tf.end().pred_opt().unwrap();
        assert_eq!(t.time_frame, format!("{}: {} to {} ({})", tf.field, tf.start, last, tf.duration));
        assert_eq!(viewer_filtered.contains(&c.id), !t.viewer_filters.is_empty(), "{}: viewer filters", c.id);
        let block = render.transparency_block.iter().find(|(id, _)| id == &c.id).unwrap();
        assert_eq!(&block.1, t);
    }
}

fn transparency() -> String {
    let (_, ws) = scenario::run_file(&samples().join("scenario.yaml")).unwrap();
    let clock = FixedClock(ws.store.platform.messages.last().unwrap().timestamp);
    let mut renders = 0;
    for entry in ws.store.snapshots.snapshots.values() {
        for r in &entry.renders {
            check_transparency(r, entry.version(r.version).unwrap(), &[]);
            renders += 1;
        }
    }
    for m in &ws.store.platform.messages {
        let Some((sid, version, _)) = m.snapshot_ref() else { continue };
        let spec = ws.store.snapshots.get(sid).unwrap().version(version).unwrap();
        for viewer in ["ana", "bo"] {
            let view = ws.view(m.id, viewer, &clock).unwrap();
            check_transparency(view.render.as_ref().unwrap(), spec, &view.filtered_components);
            renders += 1;
            if viewer == "ana" && m.id == 1 {
                let cr = view.render.as_ref().unwrap().component("sales-by-category").unwrap();
                assert_eq!(cr.transparency.viewer_filters, ["Region = West"]);
            }
        }
    }
    format!("{renders} renders from the scenario (stored versions and per-viewer views) carry every data filter and the time frame")
}

fn main() {
    let checks: [(u32, &str, fn() -> String); 10] = [
        (1, "spec round-trip", spec_round_trip),
        (2, "aggregation oracle", aggregation_oracle),
        (3, "freshness rule", freshness_rule),
        (4, "recurrence", recurrence),
        (5, "applicability matrix", applicability_matrix),
        (6, "template rendering", template_rendering),
        (7, "viewer isolation", viewer_isolation),
        (8, "staleness predicate", staleness),
        (9, "scenario replay", scenario_replay),
        (10, "transparency", transparency),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (n, name, check) in checks {
        match catch_unwind(AssertUnwindSafe(check)) {
            Ok(detail) => println!("PASS {n:>2} {name}: {detail}"),
            Err(p) => {
                failed += 1;
                let msg = p
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                println!("FAIL {n:>2} {name}: {msg}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} of 10 criteria failed");
        std::process::exit(1);
    }
    println!("all 10 criteria pass");
}
