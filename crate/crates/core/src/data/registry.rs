use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use super::{load_table, parse_declared_schema, DataError, DeclaredSchema, Table};

#[derive(Debug, Clone)]
enum Source {
    Loaded(Arc<Table>),
    Csv {
        path: PathBuf,
        schema: Option<DeclaredSchema>,
        cache: Arc<OnceLock<Result<Arc<Table>, String>>>,
    },
}

/// Resolves data-source identifiers to tables. CSV sources load lazily, once.
#[derive(Debug, Clone, Default)]
pub struct DataSourceRegistry {
    sources: BTreeMap<String, Source>,
}

impl DataSourceRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_table(&mut self, id: &str, table: Table) {
        self.sources.insert(id.to_string(), Source::Loaded(Arc::new(table)));
    }

    /// Registers a CSV file. A sidecar `<file>.schema.yaml` next to it, when present,
    /// supplies declared column types unless `schema` is given.
    pub fn insert_csv(&mut self, id: &str, path: impl Into<PathBuf>, schema: Option<DeclaredSchema>) {
        self.sources.insert(
            id.to_string(),
            Source::Csv {
                path: path.into(),
                schema,
                cache: Arc::new(OnceLock::new()),
            },
        );
    }

    pub fn remove(&mut self, id: &str) {
        self.sources.remove(id);
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.sources.keys().map(String::as_str)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.sources.contains_key(id)
    }

    pub fn resolve(&self, id: &str) -> Result<Arc<Table>, DataError> {
        match self.sources.get(id) {
            None => Err(DataError::UnknownSource(id.to_string())),
            Some(Source::Loaded(t)) => Ok(t.clone()),
            Some(Source::Csv { path, schema, cache }) => cache
                .get_or_init(|| load_csv_file(path, schema.as_ref()).map(Arc::new).map_err(|e| e.to_string()))
                .clone()
                .map_err(|message| DataError::SourceLoad {
                    source_id: id.to_string(),
                    message,
                }),
        }
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".schema.yaml");
    path.with_file_name(name)
}

fn load_csv_file(path: &Path, schema: Option<&DeclaredSchema>) -> Result<Table, DataError> {
    let sidecar;
    let schema = match schema {
        Some(s) => Some(s),
        None => {
            let p = sidecar_path(path);
            if p.exists() {
                let text = std::fs::read_to_string(&p).map_err(|e| DataError::Schema(format!("{}: {e}", p.display())))?;
                sidecar = parse_declared_schema(&text)?;
                Some(&sidecar)
            } else {
                None
            }
        }
    };
    let file = File::open(path).map_err(|e| DataError::Csv(format!("{}: {e}", path.display())))?;
    load_table(file, schema)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ColumnType;

    #[test]
    fn lazy_csv_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("codes.csv");
        std::fs::write(&csv, "Code,Sales\n001,5\n002,7\n").unwrap();
        std::fs::write(dir.path().join("codes.csv.schema.yaml"), "Code: string\n").unwrap();
        let mut reg = DataSourceRegistry::new();
        reg.insert_csv("codes", &csv, None);
        let t = reg.resolve("codes").unwrap();
        assert_eq!(t.column_type("Code"), Some(ColumnType::String));
        assert_eq!(t.column_type("Sales"), Some(ColumnType::Number));
        assert!(matches!(reg.resolve("nope"), Err(DataError::UnknownSource(_))));
    }

    #[test]
    fn missing_file_reports_source_load() {
        let mut reg = DataSourceRegistry::new();
        reg.insert_csv("gone", "/nonexistent/file.csv", None);
        assert!(matches!(reg.resolve("gone"), Err(DataError::SourceLoad { .. })));
    }
}
