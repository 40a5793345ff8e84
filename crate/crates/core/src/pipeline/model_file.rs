//! Versioned JSON model file. Dense numeric blocks are base64-encoded
//! little-endian IEEE-754 doubles; scalars are plain JSON numbers written
//! with round-trip precision.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::StandardizationStats;
use crate::gp::GpHead;
use crate::joint::TrainedModel;
use crate::kernel::Hyperparams;
use crate::matrix::FeatureMatrix;
use crate::ranking::{DifferenceSet, Provenance, RankModel};
use crate::traversal::TraversalConfig;

use super::manifest::{parse_versioned, read_versioned};

pub const MODEL_FORMAT: &str = "gprank-model";
pub const MODEL_VERSION: u32 = 1;

mod block {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let bytes: Vec<u8> = v.iter().flat_map(|x| x.to_le_bytes()).collect();
        s.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let text = String::deserialize(d)?;
        let bytes = STANDARD.decode(text.as_bytes()).map_err(D::Error::custom)?;
        if bytes.len() % 8 != 0 {
            return Err(D::Error::custom(format!(
                "numeric block of {} bytes is not a whole number of f64 values",
                bytes.len()
            )));
        }
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Matrix {
    rows: usize,
    cols: usize,
    /// Row-major.
    #[serde(with = "block")]
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HyperparamsRepr {
    log_sigma_f2: f64,
    #[serde(with = "block")]
    log_theta: Vec<f64>,
    log_sigma_y2: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StandardizationRepr {
    #[serde(with = "block")]
    mean: Vec<f64>,
    #[serde(with = "block")]
    scale: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeadRepr {
    target_index: usize,
    target_mean: f64,
    #[serde(with = "block")]
    targets: Vec<f64>,
    #[serde(with = "block")]
    weights: Vec<f64>,
    cholesky: Matrix,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RankingRepr {
    c: f64,
    p: usize,
    differences: Matrix,
    provenance: Vec<Provenance>,
    #[serde(with = "block")]
    alpha: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    version: u32,
    hyperparams: HyperparamsRepr,
    standardization: StandardizationRepr,
    train_features: Matrix,
    heads: Vec<HeadRepr>,
    ranking: RankingRepr,
    traversal: TraversalConfig,
}

fn dense_to_matrix(m: &DMatrix<f64>) -> Matrix {
    let (rows, cols) = m.shape();
    Matrix {
        rows,
        cols,
        data: m.transpose().as_slice().to_vec(),
    }
}

fn features_to_matrix(m: &FeatureMatrix) -> Matrix {
    Matrix {
        rows: m.rows(),
        cols: m.cols(),
        data: m.as_slice().to_vec(),
    }
}

impl From<&TrainedModel> for ModelFile {
    fn from(m: &TrainedModel) -> Self {
        Self {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            hyperparams: HyperparamsRepr {
                log_sigma_f2: m.hyperparams.log_sigma_f2,
                log_theta: m.hyperparams.log_theta.clone(),
                log_sigma_y2: m.hyperparams.log_sigma_y2,
            },
            standardization: StandardizationRepr {
                mean: m.stats.mean.clone(),
                scale: m.stats.scale.clone(),
            },
            train_features: features_to_matrix(&m.train_features),
            heads: m
                .heads
                .iter()
                .map(|h| HeadRepr {
                    target_index: h.target_index,
                    target_mean: h.target_mean,
                    targets: h.targets.clone(),
                    weights: h.weights.clone(),
                    cholesky: dense_to_matrix(&h.cholesky),
                })
                .collect(),
            ranking: RankingRepr {
                c: m.rank.c,
                p: m.rank.differences.p,
                differences: features_to_matrix(&m.rank.differences.vectors),
                provenance: m.rank.differences.provenance.clone(),
                alpha: m.rank.alpha.clone(),
            },
            traversal: m.traversal.clone(),
        }
    }
}

struct Checker<'a> {
    path: &'a Path,
}

impl Checker<'_> {
    fn fail<T>(&self, message: String) -> Result<T> {
        Err(Error::Schema {
            path: self.path.to_path_buf(),
            message,
        })
    }

    fn len(&self, field: &str, got: usize, expected: usize) -> Result<()> {
        if got == expected {
            Ok(())
        } else {
            self.fail(format!("{field}: expected {expected} values, found {got}"))
        }
    }

    fn matrix(&self, field: &str, m: &Matrix, rows: usize, cols: usize) -> Result<()> {
        if m.rows != rows || m.cols != cols {
            return self.fail(format!(
                "{field}: expected {rows}x{cols}, found {}x{}",
                m.rows, m.cols
            ));
        }
        self.len(&format!("{field}.data"), m.data.len(), rows * cols)
    }

    fn finite(&self, field: &str, v: &[f64]) -> Result<()> {
        match v.iter().position(|x| !x.is_finite()) {
            Some(i) => self.fail(format!("{field}[{i}] is not finite")),
            None => Ok(()),
        }
    }
}

fn into_model(f: ModelFile, path: &Path) -> Result<TrainedModel> {
    let ck = Checker { path };
    let d = f.hyperparams.log_theta.len();
    ck.finite("hyperparams.log_theta", &f.hyperparams.log_theta)?;
    ck.finite(
        "hyperparams",
        &[f.hyperparams.log_sigma_f2, f.hyperparams.log_sigma_y2],
    )?;
    ck.len("standardization.mean", f.standardization.mean.len(), d)?;
    ck.len("standardization.scale", f.standardization.scale.len(), d)?;
    if let Some(i) = f.standardization.scale.iter().position(|s| !(*s > 0.0)) {
        return ck.fail(format!("standardization.scale[{i}] must be positive"));
    }
    let n = f.train_features.rows;
    ck.matrix("train_features", &f.train_features, n, d)?;
    if f.heads.len() != 3 {
        return ck.fail(format!("heads: expected 3 entries, found {}", f.heads.len()));
    }
    for (i, h) in f.heads.iter().enumerate() {
        if h.target_index != i {
            return ck.fail(format!("heads[{i}].target_index: expected {i}, found {}", h.target_index));
        }
        ck.len(&format!("heads[{i}].targets"), h.targets.len(), n)?;
        ck.len(&format!("heads[{i}].weights"), h.weights.len(), n)?;
        ck.matrix(&format!("heads[{i}].cholesky"), &h.cholesky, n, n)?;
        ck.finite(&format!("heads[{i}].weights"), &h.weights)?;
    }
    let r = &f.ranking;
    let nd = r.differences.rows;
    ck.matrix("ranking.differences", &r.differences, nd, d)?;
    ck.len("ranking.alpha", r.alpha.len(), nd)?;
    ck.len("ranking.provenance", r.provenance.len(), nd)?;
    if let Some(i) = r.alpha.iter().position(|a| !(0.0..=r.c).contains(a)) {
        return ck.fail(format!("ranking.alpha[{i}] outside [0, c]"));
    }
    if let Err(e) = f.traversal.validate() {
        return ck.fail(format!("traversal: {e}"));
    }

    Ok(TrainedModel {
        hyperparams: Hyperparams {
            log_sigma_f2: f.hyperparams.log_sigma_f2,
            log_theta: f.hyperparams.log_theta,
            log_sigma_y2: f.hyperparams.log_sigma_y2,
        },
        heads: f
            .heads
            .into_iter()
            .map(|h| GpHead {
                target_index: h.target_index,
                targets: h.targets,
                target_mean: h.target_mean,
                cholesky: DMatrix::from_row_slice(n, n, &h.cholesky.data),
                weights: h.weights,
            })
            .collect(),
        rank: RankModel {
            alpha: f.ranking.alpha,
            c: f.ranking.c,
            differences: DifferenceSet {
                vectors: FeatureMatrix::from_vec(nd, d, f.ranking.differences.data),
                provenance: f.ranking.provenance,
                p: f.ranking.p,
            },
        },
        stats: StandardizationStats {
            mean: f.standardization.mean,
            scale: f.standardization.scale,
        },
        train_features: FeatureMatrix::from_vec(n, d, f.train_features.data),
        traversal: f.traversal,
    })
}

pub fn model_to_json(model: &TrainedModel) -> String {
    serde_json::to_string_pretty(&ModelFile::from(model)).expect("model serializes")
}

/// Parses a model from text; `origin` is only used in diagnostics.
pub fn model_from_json(text: &str, origin: &Path) -> Result<TrainedModel> {
    let f: ModelFile = parse_versioned(text, origin, MODEL_FORMAT, MODEL_VERSION)?;
    into_model(f, origin)
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<()> {
    super::write_atomic(path, model_to_json(model).as_bytes())
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let f: ModelFile = read_versioned(path, MODEL_FORMAT, MODEL_VERSION)?;
    into_model(f, path)
}
