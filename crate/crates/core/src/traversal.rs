//! Test-time parameter prediction and traversal of the parameter space
//! around the prediction.
//!
//! Candidates lie on a single ray through the predicted mean `m` along the
//! predictive standard deviations `s`: `m + t * mu * s` for integer `t`.
//! The stride `mu` is chosen so the outermost positive stride reaches the
//! upper bound, and every candidate is clipped into the per-coordinate box
//! derived from the original image's parameters.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{extract_features, measure_params, ParamVector, RasterImage};
use crate::imaging::{retarget, Retargeted};
use crate::joint::TrainedModel;
use crate::ranking;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraversalConfig {
    pub count: usize,
    /// Largest decrease as a fraction of the original parameter.
    pub decrease_limits: [f64; 3],
    /// Largest increase as a fraction of the original parameter.
    pub increase_limits: [f64; 3],
}

impl Default for TraversalConfig {
    fn default() -> Self {
        Self {
            count: 32,
            decrease_limits: [0.15, 0.15, 0.05],
            increase_limits: [0.35, 0.35, 0.20],
        }
    }
}

impl TraversalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::InvalidConfig("candidate count must be at least 1".into()));
        }
        let limits = self.decrease_limits.iter().chain(&self.increase_limits);
        if limits.clone().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::InvalidConfig("traversal limits must be nonnegative".into()));
        }
        Ok(())
    }

    /// Per-coordinate `(lower, upper)` bounds around the original parameters.
    pub fn bounds(&self, y_low: &ParamVector) -> ([f64; 3], [f64; 3]) {
        let y = y_low.to_array();
        let ceil = ParamVector::ceilings();
        let lo = [0, 1, 2].map(|j| ((1.0 - self.decrease_limits[j]) * y[j]).max(0.0));
        let hi = [0, 1, 2].map(|j| ((1.0 + self.increase_limits[j]) * y[j]).min(ceil[j]).max(lo[j]));
        (lo, hi)
    }
}

/// Output of [`gen_param_grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGrid {
    pub candidates: Vec<ParamVector>,
    /// Candidates dropped because they coincided with an earlier one after clipping.
    pub duplicates_removed: usize,
    /// Set when every predictive deviation is zero and only the mean is emitted.
    pub zero_stride: bool,
    pub mu: f64,
}

fn clip(v: [f64; 3], lo: [f64; 3], hi: [f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|j| v[j].clamp(lo[j], hi[j]))
}

pub fn gen_param_grid(m: &ParamVector, s: &ParamVector, y_low: &ParamVector, cfg: &TraversalConfig) -> Result<ParamGrid> {
    cfg.validate()?;
    let (lo, hi) = cfg.bounds(y_low);
    let m = m.to_array();
    let s = s.to_array();
    if s.iter().any(|v| !(*v >= 0.0)) || m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "prediction must be finite with s >= 0, got m={m:?} s={s:?}"
        )));
    }
    let center = ParamVector::from_array(clip(m, lo, hi));
    let n_neg = (cfg.count - 1) / 2;
    let n_pos = cfg.count - 1 - n_neg;

    let zero_stride = s.iter().all(|&v| v == 0.0);
    // Room above the mean on each moving coordinate; pinned ones are skipped.
    let mu = (0..3)
        .filter(|&j| s[j] > 0.0)
        .filter_map(|j| {
            let room = hi[j] - m[j];
            let span = if room > 0.0 { room } else { hi[j] - lo[j] };
            (span > 0.0).then(|| span / s[j])
        })
        .fold(f64::INFINITY, f64::min);
    if zero_stride || n_pos == 0 || !mu.is_finite() {
        // With no room to move, every stride would clip onto the mean.
        return Ok(ParamGrid {
            candidates: vec![center],
            duplicates_removed: if zero_stride { 0 } else { cfg.count - 1 },
            zero_stride,
            mu: 0.0,
        });
    }
    let mu = mu / n_pos as f64;

    let steps = (-(n_neg as i64)..=n_pos as i64).map(|t| t as f64 * mu);
    let mut candidates: Vec<ParamVector> = Vec::with_capacity(cfg.count);
    let mut duplicates_removed = 0;
    for t in steps {
        let p = ParamVector::from_array(clip([0, 1, 2].map(|j| m[j] + t * s[j]), lo, hi));
        if candidates.contains(&p) {
            duplicates_removed += 1;
        } else {
            candidates.push(p);
        }
    }
    Ok(ParamGrid {
        candidates,
        duplicates_removed,
        zero_stride: false,
        mu,
    })
}

/// Predicted means and standard deviations of the enhanced parameters.
pub fn predict_params(model: &TrainedModel, f_low: &[f64]) -> Result<(ParamVector, ParamVector)> {
    model.predict_params(f_low)
}

/// One rendered candidate.
#[derive(Clone, Debug)]
pub struct EnhancedCandidate {
    pub image: RasterImage,
    /// Parameters the candidate was rendered towards.
    pub target: ParamVector,
    /// Parameters measured on the rendered image.
    pub measured: ParamVector,
    pub quality: f64,
    /// Some coordinate could not reach its target because of clipping.
    pub clipped: bool,
}

#[derive(Clone, Debug)]
pub struct EnhanceResult {
    pub original: ParamVector,
    pub predicted_mean: ParamVector,
    pub predicted_std: ParamVector,
    pub grid: ParamGrid,
    /// Sorted by descending quality.
    pub ranked: Vec<EnhancedCandidate>,
    /// Targets that could not be rendered, with the reason.
    pub failures: Vec<(ParamVector, String)>,
}

/// Predicts, traverses, renders and ranks enhancement candidates for one image.
pub fn enhance(model: &TrainedModel, image: &RasterImage, cfg: &TraversalConfig) -> Result<EnhanceResult> {
    let raw_low = extract_features(image);
    let original = measure_params(image);
    let (m, s) = model.predict_params(raw_low.as_slice())?;
    let grid = gen_param_grid(&m, &s, &original, cfg)?;
    let low = model.standardize(raw_low.as_slice())?;

    let rendered: Vec<std::result::Result<EnhancedCandidate, (ParamVector, String)>> = grid
        .candidates
        .par_iter()
        .map(|target| {
            let Retargeted { image: out, clipped } =
                retarget(image, target).map_err(|e| (*target, e.to_string()))?;
            let feat = extract_features(&out);
            let cand = model.standardize(feat.as_slice()).map_err(|e| (*target, e.to_string()))?;
            let quality = model
                .rank
                .quality_score(&model.hyperparams, &low, &cand)
                .map_err(|e| (*target, e.to_string()))?;
            Ok(EnhancedCandidate {
                measured: feat.params(),
                image: out,
                target: *target,
                quality,
                clipped,
            })
        })
        .collect();

    let mut ok = Vec::new();
    let mut failures = Vec::new();
    for r in rendered {
        match r {
            Ok(c) => ok.push(c),
            Err(f) => failures.push(f),
        }
    }
    if ok.is_empty() {
        return Err(Error::AllCandidatesFailed(grid.candidates.len()));
    }
    let scores: Vec<f64> = ok.iter().map(|c| c.quality).collect();
    let order = ranking::rank_by_score(&scores)?;
    let mut slots: Vec<Option<EnhancedCandidate>> = ok.into_iter().map(Some).collect();
    let ranked = order.iter().map(|&i| slots[i].take().expect("permutation")).collect();

    Ok(EnhanceResult {
        original,
        predicted_mean: m,
        predicted_std: s,
        grid,
        ranked,
        failures,
    })
}
