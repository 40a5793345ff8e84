use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::ParamVector;

const MANIFEST_FORMAT: &str = "gprank-manifest";
const MANIFEST_VERSION: u32 = 1;

/// One image on disk with its measured parameters. Relative paths are
/// resolved against the manifest's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageRecord {
    pub path: PathBuf,
    pub params: ParamVector,
}

/// A low-quality image with `p` high-quality and `p` poor-quality versions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub low: ImageRecord,
    pub high: Vec<ImageRecord>,
    pub poor: Vec<ImageRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format: String,
    pub version: u32,
    pub entries: Vec<ManifestEntry>,
    #[serde(skip)]
    base_dir: PathBuf,
}

/// Reads `path` as JSON, checking the format tag and version before any
/// strict deserialization. Unknown fields are reported as a version mismatch.
pub(crate) fn read_versioned<T: serde::de::DeserializeOwned>(
    path: &Path,
    format: &str,
    version: u32,
) -> Result<T> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path)?;
    parse_versioned(&text, path, format, version)
}

pub(crate) fn parse_versioned<T: serde::de::DeserializeOwned>(
    text: &str,
    path: &Path,
    format: &str,
    version: u32,
) -> Result<T> {
    let schema = |message: String| Error::Schema {
        path: path.to_path_buf(),
        message,
    };
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| schema(e.to_string()))?;
    match value.get("format").and_then(|v| v.as_str()) {
        Some(f) if f == format => {}
        Some(f) => return Err(schema(format!("field `format`: expected \"{format}\", found \"{f}\""))),
        None => return Err(schema("missing field `format`".into())),
    }
    match value.get("version").and_then(|v| v.as_u64()) {
        Some(v) if v == u64::from(version) => {}
        Some(v) => {
            return Err(Error::VersionMismatch {
                path: path.to_path_buf(),
                message: format!("file has version {v}, this reader supports version {version}"),
            })
        }
        None => return Err(schema("field `version`: missing or not an unsigned integer".into())),
    }
    serde_json::from_str(text).map_err(|e| {
        let message = e.to_string();
        if message.starts_with("unknown field") || message.starts_with("unknown variant") {
            Error::VersionMismatch {
                path: path.to_path_buf(),
                message: format!("{message}; this reader supports version {version}"),
            }
        } else {
            schema(message)
        }
    })
}

impl DatasetManifest {
    pub const DEFAULT_NAME: &'static str = "manifest.json";

    pub fn new(entries: Vec<ManifestEntry>) -> Self {
        Self {
            format: MANIFEST_FORMAT.into(),
            version: MANIFEST_VERSION,
            entries,
            base_dir: PathBuf::new(),
        }
    }

    /// Loads and validates a manifest; every referenced image must exist.
    pub fn load(path: &Path) -> Result<Self> {
        let mut m: Self = read_versioned(path, MANIFEST_FORMAT, MANIFEST_VERSION)?;
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        m.validate(path)?;
        Ok(m)
    }

    fn validate(&self, path: &Path) -> Result<()> {
        let schema = |message: String| Error::Schema {
            path: path.to_path_buf(),
            message,
        };
        let p = self.entries.first().map_or(0, |e| e.high.len());
        for (i, e) in self.entries.iter().enumerate() {
            for (name, group) in [("high", &e.high), ("poor", &e.poor)] {
                if group.len() != p {
                    return Err(schema(format!(
                        "entries[{i}].{name}: expected {p} counterparts, found {}",
                        group.len()
                    )));
                }
            }
            let records = std::iter::once(("low".to_string(), &e.low))
                .chain(e.high.iter().enumerate().map(|(j, r)| (format!("high[{j}]"), r)))
                .chain(e.poor.iter().enumerate().map(|(k, r)| (format!("poor[{k}]"), r)));
            for (field, r) in records {
                if !r.params.is_physical() {
                    return Err(schema(format!(
                        "entries[{i}].{field}.params: {:?} outside physical ranges",
                        r.params
                    )));
                }
                let resolved = self.resolve(&r.path);
                if !resolved.is_file() {
                    return Err(schema(format!(
                        "entries[{i}].{field}.path: {} does not exist",
                        resolved.display()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Counterparts per class.
    pub fn p(&self) -> usize {
        self.entries.first().map_or(0, |e| e.high.len())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// First `n` entries and the rest, sharing this manifest's base directory.
    pub fn split_at(&self, n: usize) -> (Self, Self) {
        let n = n.min(self.entries.len());
        let mut a = self.clone();
        let mut b = self.clone();
        a.entries.truncate(n);
        b.entries.drain(..n);
        (a, b)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        super::write_atomic(path, self.to_json().as_bytes())
    }
}
