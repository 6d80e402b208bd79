use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{ColumnType, DataError, Table, Value};
use crate::model::{
    Aggregate, ComponentSpec, DataFilter, Dimension, DimensionKind, EvalOutcome, Measure, MeasureKind, Predicate,
    TimeFrame,
};

/// Rows dropped or cells skipped during a query, surfaced with the result.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Warnings {
    /// Per column: rows excluded because the column was null where a filter,
    /// grouping, time frame or aggregate needed it.
    pub nulls_excluded: BTreeMap<String, usize>,
    /// Computed-measure cells left null because of a zero divisor.
    pub division_by_zero: usize,
}

impl Warnings {
    pub fn is_empty(&self) -> bool {
        self.nulls_excluded.is_empty() && self.division_by_zero == 0
    }

    fn null(&mut self, column: &str) {
        *self.nulls_excluded.entry(column.to_string()).or_default() += 1;
    }

    pub fn merge(&mut self, other: &Warnings) {
        for (k, v) in &other.nulls_excluded {
            *self.nulls_excluded.entry(k.clone()).or_default() += v;
        }
        self.division_by_zero += other.division_by_zero;
    }

    pub fn messages(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .nulls_excluded
            .iter()
            .map(|(c, n)| format!("{n} null value(s) in {c:?} excluded"))
            .collect();
        if self.division_by_zero > 0 {
            out.push(format!("{} computed value(s) undefined (division by zero)", self.division_by_zero));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub keys: Vec<Value>,
    pub values: Vec<Option<f64>>,
}

impl ResultRow {
    /// Group keys joined with `/`, e.g. `Furniture` or `West/2022-03-02`.
    pub fn label(&self) -> String {
        self.keys.iter().map(|k| k.to_string()).collect::<Vec<_>>().join("/")
    }
}

/// Measures evaluated per distinct combination of dimension values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ResultTable {
    pub dimensions: Vec<Dimension>,
    pub measures: Vec<String>,
    /// Sorted by group key.
    pub rows: Vec<ResultRow>,
    /// Rows that reached evaluation, before null exclusion.
    pub input_rows: usize,
    pub warnings: Warnings,
}

impl ResultTable {
    /// True when no data fell inside the query.
    pub fn is_empty(&self) -> bool {
        self.input_rows == 0 || self.rows.is_empty()
    }

    pub fn measure_index(&self, name: &str) -> Option<usize> {
        self.measures.iter().position(|m| m == name)
    }

    pub fn row(&self, label: &str) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.label() == label)
    }

    pub fn value(&self, label: &str, measure: &str) -> Option<f64> {
        let i = self.measure_index(measure)?;
        self.row(label)?.values[i]
    }

    /// Sum of a measure's non-null values across groups.
    pub fn total(&self, measure: &str) -> Option<f64> {
        let i = self.measure_index(measure)?;
        let vals: Vec<f64> = self.rows.iter().filter_map(|r| r.values[i]).collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum())
        }
    }

    pub fn labels(&self) -> Vec<String> {
        self.rows.iter().map(ResultRow::label).collect()
    }
}

fn predicate_matches(
    cell: &Value,
    column: &str,
    ty: ColumnType,
    predicate: &Predicate,
) -> Result<bool, DataError> {
    let parse = |raw: &str| {
        Value::parse_as(raw, ty).ok_or_else(|| DataError::PredicateValue {
            column: column.to_string(),
            value: raw.to_string(),
            ty,
        })
    };
    Ok(match predicate {
        Predicate::Equals(raw) => *cell == parse(raw)?,
        Predicate::OneOf(raws) => {
            let mut hit = false;
            for raw in raws {
                hit |= *cell == parse(raw)?;
            }
            hit
        }
        Predicate::Range { min, max } => match cell {
            Value::Number(n) => *min <= *n && *n <= *max,
            _ => {
                return Err(DataError::ColumnType {
                    column: column.to_string(),
                    expected: ColumnType::Number,
                    found: ty,
                })
            }
        },
        Predicate::DateRange { start, end } => match cell {
            Value::Date(d) => start <= d && d < end,
            _ => {
                return Err(DataError::ColumnType {
                    column: column.to_string(),
                    expected: ColumnType::Date,
                    found: ty,
                })
            }
        },
    })
}

/// Keeps rows satisfying every filter. Row order is preserved.
pub fn apply_filters(t: &Table, filters: &[DataFilter]) -> Result<Table, DataError> {
    apply_filters_counted(t, filters, &mut Warnings::default())
}

pub fn apply_filters_counted(t: &Table, filters: &[DataFilter], warnings: &mut Warnings) -> Result<Table, DataError> {
    let mut resolved = Vec::with_capacity(filters.len());
    for f in filters {
        let idx = t.column_index(&f.column)?;
        resolved.push((idx, t.columns()[idx].ty, f));
    }
    // Surface predicate errors even on empty tables.
    for (_, ty, f) in &resolved {
        check_predicate_values(&f.column, *ty, &f.predicate)?;
    }
    let mut error = None;
    let out = t.retain_rows(|row| {
        for (idx, ty, f) in &resolved {
            match &row[*idx] {
                None => {
                    warnings.null(&f.column);
                    return false;
                }
                Some(v) => match predicate_matches(v, &f.column, *ty, &f.predicate) {
                    Ok(true) => {}
                    Ok(false) => return false,
                    Err(e) => {
                        error.get_or_insert(e);
                        return false;
                    }
                },
            }
        }
        true
    });
    match error {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

fn check_predicate_values(column: &str, ty: ColumnType, predicate: &Predicate) -> Result<(), DataError> {
    let check = |raw: &str| {
        if Value::parse_as(raw, ty).is_some() {
            Ok(())
        } else {
            Err(DataError::PredicateValue {
                column: column.to_string(),
                value: raw.to_string(),
                ty,
            })
        }
    };
    match predicate {
        Predicate::Equals(raw) => check(raw),
        Predicate::OneOf(raws) => raws.iter().try_for_each(|r| check(r)),
        Predicate::Range { .. } if ty != ColumnType::Number => Err(DataError::ColumnType {
            column: column.to_string(),
            expected: ColumnType::Number,
            found: ty,
        }),
        Predicate::DateRange { .. } if ty != ColumnType::Date => Err(DataError::ColumnType {
            column: column.to_string(),
            expected: ColumnType::Date,
            found: ty,
        }),
        _ => Ok(()),
    }
}

/// Keeps rows whose `tf.field` date lies in `[start, end)`.
pub fn apply_time_frame(t: &Table, tf: &TimeFrame) -> Result<Table, DataError> {
    apply_time_frame_counted(t, tf, &mut Warnings::default())
}

pub fn apply_time_frame_counted(t: &Table, tf: &TimeFrame, warnings: &mut Warnings) -> Result<Table, DataError> {
    let idx = t.column_index(&tf.field)?;
    let ty = t.columns()[idx].ty;
    if ty != ColumnType::Date {
        return Err(DataError::ColumnType {
            column: tf.field.clone(),
            expected: ColumnType::Date,
            found: ty,
        });
    }
    let (start, end) = (tf.start, tf.end());
    Ok(t.retain_rows(|row| match &row[idx] {
        Some(Value::Date(d)) => start <= *d && *d < end,
        _ => {
            warnings.null(&tf.field);
            false
        }
    }))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EvalOptions {
    /// Emit every combination of observed dimension values, with zero for sums and
    /// counts and null elsewhere where a combination has no rows.
    pub zero_fill: bool,
}

#[derive(Default, Clone)]
struct Acc {
    sum: f64,
    n: usize,
    min: Option<f64>,
    max: Option<f64>,
}

impl Acc {
    fn push(&mut self, v: f64) {
        self.sum += v;
        self.n += 1;
        self.min = Some(self.min.map_or(v, |m| m.min(v)));
        self.max = Some(self.max.map_or(v, |m| m.max(v)));
    }

    fn finish(&self, agg: Aggregate, rows: usize) -> Option<f64> {
        match agg {
            Aggregate::Count => Some(rows as f64),
            _ if self.n == 0 => None,
            Aggregate::Sum => Some(self.sum),
            Aggregate::Avg => Some(self.sum / self.n as f64),
            Aggregate::Min => self.min,
            Aggregate::Max => self.max,
        }
    }
}

/// Order in which computed measures can be evaluated, or the name on a cycle.
fn computed_order(measures: &[Measure]) -> Result<Vec<usize>, DataError> {
    let index: BTreeMap<&str, usize> = measures.iter().enumerate().map(|(i, m)| (m.name.as_str(), i)).collect();
    let mut order = Vec::new();
    let mut state = vec![0u8; measures.len()]; // 0 new, 1 visiting, 2 done

    fn visit(
        i: usize,
        measures: &[Measure],
        index: &BTreeMap<&str, usize>,
        state: &mut [u8],
        order: &mut Vec<usize>,
    ) -> Result<(), DataError> {
        match state[i] {
            2 => return Ok(()),
            1 => return Err(DataError::CyclicMeasure(measures[i].name.clone())),
            _ => {}
        }
        state[i] = 1;
        if let MeasureKind::Computed { expression } = &measures[i].kind {
            for r in expression.references() {
                let j = *index.get(r).ok_or_else(|| DataError::UnknownMeasure(r.to_string()))?;
                visit(j, measures, index, state, order)?;
            }
            order.push(i);
        }
        state[i] = 2;
        Ok(())
    }

    for i in 0..measures.len() {
        visit(i, measures, &index, &mut state, &mut order)?;
    }
    Ok(order)
}

/// Groups by `dims` and evaluates every measure per group.
///
/// Aggregated and column measures (columns are summed) are computed from rows;
/// computed measures then run on the aggregated values. With no dimensions the
/// result is a single total row.
pub fn evaluate(t: &Table, measures: &[Measure], dims: &[Dimension]) -> Result<ResultTable, DataError> {
    evaluate_with(t, measures, dims, EvalOptions::default())
}

pub fn evaluate_with(
    t: &Table,
    measures: &[Measure],
    dims: &[Dimension],
    options: EvalOptions,
) -> Result<ResultTable, DataError> {
    let dim_idx: Vec<usize> = dims
        .iter()
        .map(|d| t.column_index(&d.source_column))
        .collect::<Result<_, _>>()?;
    for (d, &i) in dims.iter().zip(&dim_idx) {
        let ty = t.columns()[i].ty;
        if d.kind == DimensionKind::Temporal && ty != ColumnType::Date {
            return Err(DataError::ColumnType {
                column: d.source_column.clone(),
                expected: ColumnType::Date,
                found: ty,
            });
        }
    }
    // (column index, aggregate) for row-level measures.
    let mut row_level: Vec<Option<(usize, Aggregate)>> = Vec::with_capacity(measures.len());
    for m in measures {
        row_level.push(match &m.kind {
            MeasureKind::Column { source_column } => Some((t.column_index(source_column)?, Aggregate::Sum)),
            MeasureKind::Aggregated {
                source_column,
                aggregate,
            } => {
                let idx = t.column_index(source_column)?;
                let ty = t.columns()[idx].ty;
                if ty != ColumnType::Number && *aggregate != Aggregate::Count {
                    return Err(DataError::ColumnType {
                        column: source_column.clone(),
                        expected: ColumnType::Number,
                        found: ty,
                    });
                }
                Some((idx, *aggregate))
            }
            MeasureKind::Computed { .. } => None,
        });
    }
    let order = computed_order(measures)?;

    let mut warnings = Warnings::default();
    let mut groups: BTreeMap<Vec<Value>, (usize, Vec<Acc>)> = BTreeMap::new();
    if dims.is_empty() {
        groups.insert(Vec::new(), (0, vec![Acc::default(); measures.len()]));
    }
    'rows: for row in t.rows() {
        let mut key = Vec::with_capacity(dims.len());
        for (d, &i) in dims.iter().zip(&dim_idx) {
            match &row[i] {
                Some(v) => key.push(v.clone()),
                None => {
                    warnings.null(&d.source_column);
                    continue 'rows;
                }
            }
        }
        let entry = groups
            .entry(key)
            .or_insert_with(|| (0, vec![Acc::default(); measures.len()]));
        entry.0 += 1;
        for (acc, spec) in entry.1.iter_mut().zip(&row_level) {
            let Some((idx, agg)) = spec else { continue };
            if *agg == Aggregate::Count {
                continue;
            }
            match &row[*idx] {
                Some(Value::Number(v)) => acc.push(*v),
                None => warnings.null(&t.columns()[*idx].name),
                Some(_) => {}
            }
        }
    }

    if options.zero_fill && !dims.is_empty() {
        let mut per_dim: Vec<BTreeSet<Value>> = vec![BTreeSet::new(); dims.len()];
        for key in groups.keys() {
            for (set, v) in per_dim.iter_mut().zip(key) {
                set.insert(v.clone());
            }
        }
        let mut combos: Vec<Vec<Value>> = vec![Vec::new()];
        for set in &per_dim {
            combos = combos
                .into_iter()
                .flat_map(|prefix| {
                    set.iter().map(move |v| {
                        let mut k = prefix.clone();
                        k.push(v.clone());
                        k
                    })
                })
                .collect();
        }
        for combo in combos {
            groups
                .entry(combo)
                .or_insert_with(|| (0, vec![Acc::default(); measures.len()]));
        }
    }

    let mut rows = Vec::with_capacity(groups.len());
    for (keys, (count, accs)) in groups {
        let mut values: Vec<Option<f64>> = accs
            .iter()
            .zip(&row_level)
            .map(|(acc, spec)| match spec {
                Some((_, Aggregate::Sum)) if count == 0 && options.zero_fill => Some(0.0),
                Some((_, agg)) => acc.finish(*agg, count),
                None => None,
            })
            .collect();
        for &i in &order {
            let MeasureKind::Computed { expression } = &measures[i].kind else { continue };
            let lookup = |name: &str| {
                measures
                    .iter()
                    .position(|m| m.name == name)
                    .and_then(|j| values[j])
            };
            values[i] = match expression.eval(&lookup) {
                EvalOutcome::Value(v) => Some(v),
                EvalOutcome::Null => None,
                EvalOutcome::DivisionByZero => {
                    warnings.division_by_zero += 1;
                    None
                }
            };
        }
        rows.push(ResultRow { keys, values });
    }

    Ok(ResultTable {
        dimensions: dims.to_vec(),
        measures: measures.iter().map(|m| m.name.clone()).collect(),
        rows,
        input_rows: t.len(),
        warnings,
    })
}

/// The full component pipeline: filters (plus any extra, e.g. a viewer's), time frame,
/// then evaluation. Warnings from every stage end up on the result.
pub fn run_component_query(
    t: &Table,
    component: &ComponentSpec,
    extra_filters: &[DataFilter],
) -> Result<ResultTable, DataError> {
    let mut warnings = Warnings::default();
    let mut filters = component.data_filters.clone();
    filters.extend_from_slice(extra_filters);
    let filtered = apply_filters_counted(t, &filters, &mut warnings)?;
    let framed = apply_time_frame_counted(&filtered, &component.time_frame, &mut warnings)?;
    let mut result = evaluate(&framed, &component.measures, &component.dimensions)?;
    warnings.merge(&result.warnings);
    result.warnings = warnings;
    Ok(result)
}

/// Distinct values of the component's nominal dimension within its filters and time frame.
pub fn component_categories(t: &Table, component: &ComponentSpec) -> Result<Vec<String>, DataError> {
    let Some(dim) = component.dimensions.iter().find(|d| d.kind == DimensionKind::Nominal) else {
        return Ok(Vec::new());
    };
    let filtered = apply_filters(t, &component.data_filters)?;
    let framed = apply_time_frame(&filtered, &component.time_frame)?;
    let idx = framed.column_index(&dim.source_column)?;
    let set: BTreeSet<&Value> = framed.rows().iter().filter_map(|r| r[idx].as_ref()).collect();
    Ok(set.into_iter().map(|v| v.to_string()).collect())
}
