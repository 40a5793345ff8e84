//! Dataset manifests, model persistence, evaluation and the synthetic
//! experiment harness.

mod eval;
mod experiment;
mod manifest;
mod model_file;
mod sheet;

pub use eval::{evaluate, evaluate_features, pearson, EvalReport};
pub use experiment::{
    enhancement_trial, load_training_set, ranking_trial, run_synthetic_experiment, ExperimentConfig,
    ExperimentReport, LoadedEntry,
};
pub use manifest::{DatasetManifest, ImageRecord, ManifestEntry};
pub use model_file::{load_model, model_from_json, model_to_json, save_model, MODEL_FORMAT, MODEL_VERSION};
pub use sheet::{contact_sheet, SheetLayout};

use std::io::Write;
use std::path::Path;

use crate::error::Result;

/// Writes `bytes` to a temporary file next to `path` and renames it over
/// `path`, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
