//! Exact Gaussian-process regression through a Cholesky factorization.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::kernel::{self, Hyperparams};
use crate::matrix::FeatureMatrix;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Relative jitter levels tried, in order, when a factorization fails.
const JITTER_LEVELS: [f64; 5] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

/// Cholesky factorization, retrying with diagonal jitter scaled by the mean
/// diagonal before giving up.
pub fn cholesky_with_jitter(k: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    if k.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveDefinite);
    }
    if let Some(c) = Cholesky::new(k.clone()) {
        return Ok(c);
    }
    let n = k.nrows();
    let mean_diag = k.diagonal().sum() / n.max(1) as f64;
    for level in JITTER_LEVELS {
        let mut kj = k.clone();
        for i in 0..n {
            kj[(i, i)] += level * mean_diag;
        }
        if let Some(c) = Cholesky::new(kj) {
            return Ok(c);
        }
    }
    Err(Error::NotPositiveDefinite)
}

pub(crate) fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
}

fn check_targets(features: &FeatureMatrix, n_targets: usize) -> Result<()> {
    if features.is_empty() {
        return Err(Error::EmptyFeatureSet);
    }
    if features.rows() != n_targets {
        return Err(Error::DimensionMismatch {
            expected: features.rows(),
            found: n_targets,
        });
    }
    Ok(())
}

/// Negative log marginal likelihood of (already centered) targets `y`,
/// including the `N/2 log 2 pi` constant.
pub fn nll(features: &FeatureMatrix, y: &[f64], h: &Hyperparams) -> Result<f64> {
    check_targets(features, y.len())?;
    let k = kernel::gram_self(features, h, true).values;
    let chol = cholesky_with_jitter(k)?;
    let yv = DVector::from_column_slice(y);
    let alpha = chol.solve(&yv);
    let n = y.len() as f64;
    Ok(0.5 * yv.dot(&alpha) + 0.5 * log_det(&chol) + 0.5 * n * LN_2PI)
}

/// One fitted regression head predicting a single image parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct GpHead {
    /// 0 = saturation, 1 = brightness, 2 = contrast.
    pub target_index: usize,
    /// Centered training targets.
    pub targets: Vec<f64>,
    pub target_mean: f64,
    /// Lower-triangular factor of the noisy training gram.
    pub cholesky: DMatrix<f64>,
    /// `K_y^{-1} targets`.
    pub weights: Vec<f64>,
}

/// Posterior predictive moments at one test input.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
}

pub fn fit_head(
    features: &FeatureMatrix,
    y_raw: &[f64],
    target_index: usize,
    h: &Hyperparams,
) -> Result<GpHead> {
    check_targets(features, y_raw.len())?;
    let target_mean = y_raw.iter().sum::<f64>() / y_raw.len() as f64;
    let targets: Vec<f64> = y_raw.iter().map(|v| v - target_mean).collect();
    let k = kernel::gram_self(features, h, true).values;
    let chol = cholesky_with_jitter(k)?;
    let weights = chol.solve(&DVector::from_column_slice(&targets));
    Ok(GpHead {
        target_index,
        targets,
        target_mean,
        cholesky: chol.unpack(),
        weights: weights.as_slice().to_vec(),
    })
}

impl GpHead {
    /// Predicts from a precomputed cross-covariance `k_star` between the test
    /// input and every training input, and the prior variance `k_ss`.
    pub fn predict_from_kstar(&self, k_star: &DVector<f64>, k_ss: f64) -> Prediction {
        let mean = k_star
            .iter()
            .zip(&self.weights)
            .map(|(k, w)| k * w)
            .sum::<f64>()
            + self.target_mean;
        let v = self
            .cholesky
            .solve_lower_triangular(k_star)
            .expect("cholesky factor has a nonzero diagonal");
        let variance = (k_ss - v.norm_squared()).max(0.0);
        Prediction { mean, variance }
    }

    pub fn n_train(&self) -> usize {
        self.weights.len()
    }
}

/// Cross-covariance between `x` and every training row, plus `k(x, x) + sy2`.
pub fn k_star(train: &FeatureMatrix, x: &[f64], h: &Hyperparams) -> Result<(DVector<f64>, f64)> {
    if x.len() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: x.len(),
        });
    }
    let theta = h.theta();
    let sf2 = h.sigma_f2();
    let ks = DVector::from_iterator(
        train.rows(),
        train.iter_rows().map(|r| kernel::se_value(r, x, &theta, sf2)),
    );
    Ok((ks, sf2 + h.sigma_y2()))
}

/// Posterior mean and variance for one standardized test input.
pub fn predict(head: &GpHead, train: &FeatureMatrix, x: &[f64], h: &Hyperparams) -> Result<Prediction> {
    let (ks, kss) = k_star(train, x, h)?;
    Ok(head.predict_from_kstar(&ks, kss))
}
