//! Train/test harness on procedurally generated data: regression quality,
//! ranking accuracy on held-out triples and enhancement efficacy.

use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{extract_features, FeatureVector, ParamVector, RasterImage};
use crate::imaging::{gen_synthetic_dataset, SyntheticDatasetConfig};
use crate::joint::{train_joint, JointConfig, TrainedModel, TrainingLog, TrainingSet};
use crate::matrix::FeatureMatrix;
use crate::traversal::{enhance, TraversalConfig};

use super::{evaluate, DatasetManifest, EvalReport};

/// Decoded features of one manifest entry.
#[derive(Clone, Debug)]
pub struct LoadedEntry {
    pub low: FeatureVector,
    pub high: Vec<FeatureVector>,
    pub poor: Vec<FeatureVector>,
    pub low_params: ParamVector,
    pub expert_params: ParamVector,
}

fn features_of(manifest: &DatasetManifest, path: &Path) -> Result<FeatureVector> {
    Ok(extract_features(&RasterImage::load_png(&manifest.resolve(path))?))
}

fn stack(v: &[FeatureVector]) -> Result<FeatureMatrix> {
    FeatureMatrix::from_rows(&v.iter().map(FeatureVector::as_slice).collect::<Vec<_>>())
}

/// Decodes every image of the manifest and assembles the training set.
pub fn load_training_set(manifest: &DatasetManifest) -> Result<(TrainingSet, Vec<LoadedEntry>)> {
    let entries = manifest
        .entries
        .par_iter()
        .map(|e| {
            Ok(LoadedEntry {
                low: features_of(manifest, &e.low.path)?,
                high: e.high.iter().map(|r| features_of(manifest, &r.path)).collect::<Result<_>>()?,
                poor: e.poor.iter().map(|r| features_of(manifest, &r.path)).collect::<Result<_>>()?,
                low_params: e.low.params,
                expert_params: e
                    .high
                    .first()
                    .map(|h| h.params)
                    .ok_or_else(|| Error::DegenerateTrainingSet("entry without high counterpart".into()))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let lows: Vec<FeatureVector> = entries.iter().map(|e| e.low.clone()).collect();
    let set = TrainingSet {
        low: stack(&lows)?,
        high: entries.iter().map(|e| stack(&e.high)).collect::<Result<_>>()?,
        poor: entries.iter().map(|e| stack(&e.poor)).collect::<Result<_>>()?,
        targets: entries.iter().map(|e| e.expert_params).collect(),
    };
    Ok((set, entries))
}

/// Fraction of (high, poor) counterpart pairs where the high one scores
/// above the poor one relative to their low image.
pub fn ranking_trial(model: &TrainedModel, entries: &[LoadedEntry]) -> Result<(usize, usize)> {
    let results = entries
        .par_iter()
        .map(|e| {
            let mut wins = 0;
            let mut total = 0;
            for hi in &e.high {
                let qh = model.quality_score(e.low.as_slice(), hi.as_slice())?;
                for po in &e.poor {
                    let qp = model.quality_score(e.low.as_slice(), po.as_slice())?;
                    wins += usize::from(qh > qp);
                    total += 1;
                }
            }
            Ok((wins, total))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(results.iter().fold((0, 0), |(w, t), (a, b)| (w + a, t + b)))
}

/// Number of test images whose top-ranked enhancement is strictly closer to
/// the expert parameters than the original, and the number of images.
pub fn enhancement_trial(
    model: &TrainedModel,
    manifest: &DatasetManifest,
    cfg: &TraversalConfig,
) -> Result<(usize, usize)> {
    let mut successes = 0;
    for e in &manifest.entries {
        let img = RasterImage::load_png(&manifest.resolve(&e.low.path))?;
        let expert = e.high[0].params;
        let result = enhance(model, &img, cfg)?;
        let top = &result.ranked[0];
        if top.measured.distance(&expert) < result.original.distance(&expert) {
            successes += 1;
        }
    }
    Ok((successes, manifest.len()))
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub n_train: usize,
    pub n_test: usize,
    pub p: usize,
    pub image_size: usize,
    pub seed: u64,
    pub joint: JointConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_train: 40,
            n_test: 20,
            p: 2,
            image_size: 48,
            seed: 2016,
            joint: JointConfig::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub train_eval: EvalReport,
    pub test_eval: EvalReport,
    pub ranking_wins: usize,
    pub ranking_pairs: usize,
    pub enhance_successes: usize,
    pub enhance_images: usize,
    pub log: TrainingLog,
    pub model: TrainedModel,
    pub train_time: Duration,
    pub total_time: Duration,
}

impl ExperimentReport {
    pub fn ranking_accuracy(&self) -> f64 {
        self.ranking_wins as f64 / self.ranking_pairs.max(1) as f64
    }

    pub fn enhance_rate(&self) -> f64 {
        self.enhance_successes as f64 / self.enhance_images.max(1) as f64
    }
}

/// Generates `n_train + n_test` images under `work_dir`, trains on the first
/// `n_train` and evaluates on the rest.
pub fn run_synthetic_experiment(cfg: &ExperimentConfig, work_dir: &Path) -> Result<ExperimentReport> {
    let start = Instant::now();
    let data_cfg = SyntheticDatasetConfig {
        n_images: cfg.n_train + cfg.n_test,
        image_size: cfg.image_size,
        p: cfg.p,
        seed: cfg.seed,
        ..Default::default()
    };
    gen_synthetic_dataset(&data_cfg, work_dir)?;
    let manifest = DatasetManifest::load(&work_dir.join(DatasetManifest::DEFAULT_NAME))?;
    let (train_manifest, test_manifest) = manifest.split_at(cfg.n_train);

    let (train_set, _) = load_training_set(&train_manifest)?;
    let (_, test_entries) = load_training_set(&test_manifest)?;

    let t0 = Instant::now();
    let (model, log) = train_joint(&train_set, &cfg.joint)?;
    let train_time = t0.elapsed();

    let train_eval = evaluate(&model, &train_manifest)?;
    let test_eval = evaluate(&model, &test_manifest)?;
    let (ranking_wins, ranking_pairs) = ranking_trial(&model, &test_entries)?;
    let (enhance_successes, enhance_images) =
        enhancement_trial(&model, &test_manifest, &cfg.joint.traversal)?;

    Ok(ExperimentReport {
        train_eval,
        test_eval,
        ranking_wins,
        ranking_pairs,
        enhance_successes,
        enhance_images,
        log,
        model,
        train_time,
        total_time: start.elapsed(),
    })
}
