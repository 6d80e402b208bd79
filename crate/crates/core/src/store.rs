//! The on-disk store: one versioned JSON document holding registered data sources,
//! dashboards, every snapshot version with its renders, and the platform state.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::lifecycle::SnapshotStore;
use crate::model::Dashboard;
use crate::platform::Platform;

pub const STORE_FORMAT: &str = "dashsnap-store";
pub const STORE_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("cannot access store {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("store is not valid: {0}")]
    Corrupt(String),
    #[error("store format version {found} is newer than the supported version {supported}")]
    UnsupportedVersion { found: u64, supported: u32 },
}

impl StoreError {
    pub fn code(&self) -> &'static str {
        match self {
            StoreError::Io { .. } => "STORE_IO",
            StoreError::Corrupt(_) => "STORE_CORRUPT",
            StoreError::UnsupportedVersion { .. } => "STORE_VERSION",
        }
    }
}

/// A CSV data source; relative paths resolve against the store file's directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceRef {
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Store {
    #[serde(default)]
    pub sources: BTreeMap<String, SourceRef>,
    #[serde(default, with = "crate::spec_io::surface::dashboards")]
    pub dashboards: BTreeMap<String, Dashboard>,
    #[serde(default)]
    pub snapshots: SnapshotStore,
    #[serde(default)]
    pub platform: Platform,
}

#[derive(Serialize)]
struct Envelope<'a> {
    format: &'static str,
    version: u32,
    #[serde(flatten)]
    store: &'a Store,
}

impl Store {
    pub fn to_json(&self) -> String {
        let env = Envelope {
            format: STORE_FORMAT,
            version: STORE_VERSION,
            store: self,
        };
        serde_json::to_string(&env).expect("store values always serialize")
    }

    pub fn from_json(text: &str) -> Result<Store, StoreError> {
        let mut v: serde_json::Value = serde_json::from_str(text).map_err(|e| StoreError::Corrupt(e.to_string()))?;
        let obj = v
            .as_object_mut()
            .ok_or_else(|| StoreError::Corrupt("top level must be an object".into()))?;
        if obj.remove("format").as_ref().and_then(|f| f.as_str()) != Some(STORE_FORMAT) {
            return Err(StoreError::Corrupt(format!("missing \"format\": \"{STORE_FORMAT}\"")));
        }
        let version = obj
            .remove("version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| StoreError::Corrupt("missing integer \"version\"".into()))?;
        if version > STORE_VERSION as u64 {
            return Err(StoreError::UnsupportedVersion {
                found: version,
                supported: STORE_VERSION,
            });
        }
        serde_json::from_value(v).map_err(|e| StoreError::Corrupt(e.to_string()))
    }
}

pub fn save_store(store: &Store, path: &Path) -> Result<(), StoreError> {
    let io_err = |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    };
    // Write beside the target, then rename, so a crash never leaves half a store.
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, store.to_json()).map_err(io_err)?;
    fs::rename(&tmp, path).map_err(io_err)
}

pub fn load_store(path: &Path) -> Result<Store, StoreError> {
    let text = fs::read_to_string(path).map_err(|source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Store::from_json(&text)
}
