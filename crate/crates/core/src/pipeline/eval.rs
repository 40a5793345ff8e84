use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{extract_features, ParamVector, RasterImage};
use crate::joint::TrainedModel;

use super::DatasetManifest;

/// Per-parameter regression quality on a test set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Saturation, brightness, contrast.
    pub rmse: [f64; 3],
    /// `None` when either series is constant.
    pub pearson: [Option<f64>; 3],
    pub n_test: usize,
}

/// Pearson correlation, or `None` if either series has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n == 0 || n != y.len() {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Metrics of predicted against ground-truth parameters.
pub fn evaluate_features(predicted: &[ParamVector], truth: &[ParamVector]) -> Result<EvalReport> {
    if predicted.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    if predicted.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            found: predicted.len(),
        });
    }
    let n = predicted.len();
    let column = |v: &[ParamVector], m: usize| v.iter().map(|p| p.get(m)).collect::<Vec<_>>();
    let mut rmse = [0.0; 3];
    let mut r = [None; 3];
    for m in 0..3 {
        let (p, t) = (column(predicted, m), column(truth, m));
        rmse[m] = (p.iter().zip(&t).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n as f64).sqrt();
        r[m] = pearson(&p, &t);
    }
    Ok(EvalReport {
        rmse,
        pearson: r,
        n_test: n,
    })
}

/// Predicts every low image of `manifest` and compares with its first
/// high-quality counterpart.
pub fn evaluate(model: &TrainedModel, manifest: &DatasetManifest) -> Result<EvalReport> {
    if manifest.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let predicted = manifest
        .entries
        .par_iter()
        .map(|e| {
            let img = RasterImage::load_png(&manifest.resolve(&e.low.path))?;
            Ok(model.predict_params(extract_features(&img).as_slice())?.0)
        })
        .collect::<Result<Vec<_>>>()?;
    let truth: Vec<ParamVector> = manifest
        .entries
        .iter()
        .map(|e| {
            e.high
                .first()
                .map(|h| h.params)
                .ok_or_else(|| Error::InvalidConfig("manifest entry without high counterpart".into()))
        })
        .collect::<Result<_>>()?;
    evaluate_features(&predicted, &truth)
}
