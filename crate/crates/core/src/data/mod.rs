//! In-memory tables loaded from CSV and the query operations components run over them.

mod completeness;
mod query;
mod registry;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::io::Read;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub use crate::model::{ColumnType, DataSourceSchema};
pub use completeness::{detect_completeness, CompletenessReport};
pub use query::{
    apply_filters, apply_filters_counted, apply_time_frame, apply_time_frame_counted, component_categories,
    evaluate, evaluate_with, run_component_query, EvalOptions, ResultRow, ResultTable, Warnings,
};
pub use registry::DataSourceRegistry;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DataError {
    #[error("csv error: {0}")]
    Csv(String),
    #[error("row {row} has {found} fields, header has {expected}")]
    RaggedRow { row: usize, expected: usize, found: usize },
    #[error("duplicate header {0:?}")]
    DuplicateHeader(String),
    #[error("row {row}, column {column:?}: {value:?} is not a valid {ty}")]
    BadCell {
        row: usize,
        column: String,
        value: String,
        ty: ColumnType,
    },
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("column {column:?} is {found}, expected {expected}")]
    ColumnType {
        column: String,
        expected: ColumnType,
        found: ColumnType,
    },
    #[error("filter value {value:?} is not a valid {ty} for column {column:?}")]
    PredicateValue {
        column: String,
        value: String,
        ty: ColumnType,
    },
    #[error("computed measures form a cycle through {0:?}")]
    CyclicMeasure(String),
    #[error("unknown measure {0:?}")]
    UnknownMeasure(String),
    #[error("granularity {granularity} is coarser than the time frame {frame}")]
    GranularityTooCoarse { granularity: String, frame: String },
    #[error("unknown data source {0:?}")]
    UnknownSource(String),
    #[error("data source {source_id:?} failed to load: {message}")]
    SourceLoad { source_id: String, message: String },
    #[error("schema file: {0}")]
    Schema(String),
}

/// A non-null cell value.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Value {
    Number(f64),
    Date(NaiveDate),
    Text(String),
}

impl Value {
    fn rank(&self) -> u8 {
        match self {
            Value::Number(_) => 0,
            Value::Date(_) => 1,
            Value::Text(_) => 2,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Number(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_date(&self) -> Option<NaiveDate> {
        match self {
            Value::Date(d) => Some(*d),
            _ => None,
        }
    }

    /// Reads `raw` as a value of `ty`; `None` if it does not parse.
    pub fn parse_as(raw: &str, ty: ColumnType) -> Option<Value> {
        let raw = raw.trim();
        match ty {
            ColumnType::Number => raw.parse::<f64>().ok().filter(|n| n.is_finite()).map(Value::Number),
            ColumnType::Date => raw.parse::<NaiveDate>().ok().map(Value::Date),
            ColumnType::String => Some(Value::Text(raw.to_string())),
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Value {}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Number(a), Value::Number(b)) => a.total_cmp(b),
            (Value::Date(a), Value::Date(b)) => a.cmp(b),
            (Value::Text(a), Value::Text(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            Value::Number(n) => n.to_bits().hash(state),
            Value::Date(d) => d.hash(state),
            Value::Text(t) => t.hash(state),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Number(n) => write!(f, "{n}"),
            Value::Date(d) => write!(f, "{d}"),
            Value::Text(t) => f.write_str(t),
        }
    }
}

pub type Cell = Option<Value>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub ty: ColumnType,
}

/// Immutable rows under a typed header. Every cell matches its column type or is null.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Table {
    columns: Vec<Column>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    /// Builds a table, checking that names are unique and cells fit their columns.
    pub fn new(columns: Vec<Column>, rows: Vec<Vec<Cell>>) -> Result<Table, DataError> {
        let mut seen = BTreeSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(DataError::DuplicateHeader(c.name.clone()));
            }
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(DataError::RaggedRow {
                    row: i + 1,
                    expected: columns.len(),
                    found: row.len(),
                });
            }
            for (cell, col) in row.iter().zip(&columns) {
                let ok = match (cell, col.ty) {
                    (None, _) => true,
                    (Some(Value::Number(_)), ColumnType::Number) => true,
                    (Some(Value::Date(_)), ColumnType::Date) => true,
                    (Some(Value::Text(_)), ColumnType::String) => true,
                    _ => false,
                };
                if !ok {
                    return Err(DataError::BadCell {
                        row: i + 1,
                        column: col.name.clone(),
                        value: cell.as_ref().map(|v| v.to_string()).unwrap_or_default(),
                        ty: col.ty,
                    });
                }
            }
        }
        Ok(Table { columns, rows })
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Result<usize, DataError> {
        self.columns
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| DataError::UnknownColumn(name.to_string()))
    }

    pub fn column_type(&self, name: &str) -> Option<ColumnType> {
        self.columns.iter().find(|c| c.name == name).map(|c| c.ty)
    }

    pub fn schema(&self) -> DataSourceSchema {
        DataSourceSchema {
            columns: self.columns.iter().map(|c| (c.name.clone(), c.ty)).collect(),
        }
    }

    /// Same header, only the rows for which `keep` holds.
    pub(crate) fn retain_rows(&self, mut keep: impl FnMut(&[Cell]) -> bool) -> Table {
        Table {
            columns: self.columns.clone(),
            rows: self.rows.iter().filter(|r| keep(r)).cloned().collect(),
        }
    }
}

/// Column type declarations overriding inference, as read from a sidecar schema file.
pub type DeclaredSchema = BTreeMap<String, ColumnType>;

fn infer_type(cells: &[&str]) -> ColumnType {
    let non_empty: Vec<&str> = cells.iter().map(|c| c.trim()).filter(|c| !c.is_empty()).collect();
    if non_empty.is_empty() {
        return ColumnType::String;
    }
    if non_empty.iter().all(|c| ColumnType::Date.accepts(c)) {
        ColumnType::Date
    } else if non_empty.iter().all(|c| ColumnType::Number.accepts(c)) {
        ColumnType::Number
    } else {
        ColumnType::String
    }
}

/// Reads a CSV document with a header row.
///
/// Column types come from `declared` where given, otherwise they are inferred:
/// ISO dates, then numbers, then strings. Empty cells are null.
pub fn load_table<R: Read>(source: R, declared: Option<&DeclaredSchema>) -> Result<Table, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(source);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| DataError::Csv(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut seen = BTreeSet::new();
    for h in &headers {
        if !seen.insert(h.as_str()) {
            return Err(DataError::DuplicateHeader(h.clone()));
        }
    }
    let mut raw: Vec<csv::StringRecord> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| DataError::Csv(e.to_string()))?;
        if rec.len() != headers.len() {
            return Err(DataError::RaggedRow {
                row: i + 1,
                expected: headers.len(),
                found: rec.len(),
            });
        }
        raw.push(rec);
    }
    if let Some(declared) = declared {
        if let Some(unknown) = declared.keys().find(|k| !headers.contains(k)) {
            return Err(DataError::UnknownColumn(unknown.clone()));
        }
    }
    let columns: Vec<Column> = headers
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let ty = declared.and_then(|d| d.get(name).copied()).unwrap_or_else(|| {
                let cells: Vec<&str> = raw.iter().map(|r| &r[j]).collect();
                infer_type(&cells)
            });
            Column { name: name.clone(), ty }
        })
        .collect();
    let mut rows = Vec::with_capacity(raw.len());
    for (i, rec) in raw.iter().enumerate() {
        let mut row = Vec::with_capacity(columns.len());
        for (cell, col) in rec.iter().zip(&columns) {
            if cell.trim().is_empty() {
                row.push(None);
                continue;
            }
            match Value::parse_as(cell, col.ty) {
                Some(v) => row.push(Some(v)),
                None => {
                    return Err(DataError::BadCell {
                        row: i + 1,
                        column: col.name.clone(),
                        value: cell.to_string(),
                        ty: col.ty,
                    })
                }
            }
        }
        rows.push(row);
    }
    Ok(Table { columns, rows })
}

/// Parses a sidecar schema: a YAML mapping of column name to `number`, `string` or `date`.
pub fn parse_declared_schema(text: &str) -> Result<DeclaredSchema, DataError> {
    let node = crate::spec_io::yaml::parse_node(text).map_err(|e| DataError::Schema(e.to_string()))?;
    let entries = node
        .as_map()
        .ok_or_else(|| DataError::Schema("expected a mapping of column to type".into()))?;
    let mut out = DeclaredSchema::new();
    for (key, value) in entries {
        let ty = value
            .as_scalar()
            .and_then(ColumnType::parse)
            .ok_or_else(|| DataError::Schema(format!("column {:?}: expected number, string or date", key.text)))?;
        out.insert(key.text.clone(), ty);
    }
    Ok(out)
}
