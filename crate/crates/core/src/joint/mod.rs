//! Joint regression + ranking training.

mod gradcheck;
mod objective;
mod scg;
mod train;

pub use gradcheck::{gradient_check, random_instance, GradCheckInstance, GradCheckReport};
pub use objective::{
    cluster_term, objective, objective_grad, objective_terms, value_and_grad, JointProblem,
    ObjectiveTerms,
};
pub use scg::{scg_minimize, ScgOptions, ScgResult};
pub use train::{
    initial_hyperparams, prepare_problem, train_joint, CycleRecord, JointConfig, TrainingLog,
    TrainingSet,
};

use crate::error::{Error, Result};
use crate::features::{ParamVector, StandardizationStats};
use crate::gp::{self, GpHead, Prediction};
use crate::kernel::Hyperparams;
use crate::matrix::FeatureMatrix;
use crate::ranking::RankModel;
use crate::traversal::TraversalConfig;

/// Everything needed at test time. No training images are referenced.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub hyperparams: Hyperparams,
    /// Saturation, brightness and contrast heads, in that order.
    pub heads: Vec<GpHead>,
    pub rank: RankModel,
    pub stats: StandardizationStats,
    /// Standardized low-image features the heads were fitted on.
    pub train_features: FeatureMatrix,
    pub traversal: TraversalConfig,
}

impl TrainedModel {
    pub fn dim(&self) -> usize {
        self.hyperparams.dim()
    }

    pub fn standardize(&self, raw: &[f64]) -> Result<Vec<f64>> {
        self.stats.apply(raw)
    }

    /// Posterior moments of the three heads at a standardized input.
    pub fn predict_standardized(&self, x: &[f64]) -> Result<[Prediction; 3]> {
        if self.heads.len() != 3 {
            return Err(Error::InvalidConfig(format!(
                "model has {} regression heads, expected 3",
                self.heads.len()
            )));
        }
        let (ks, kss) = gp::k_star(&self.train_features, x, &self.hyperparams)?;
        Ok([0, 1, 2].map(|m| self.heads[m].predict_from_kstar(&ks, kss)))
    }

    /// Predicted parameter means and standard deviations for a raw feature.
    pub fn predict_params(&self, raw: &[f64]) -> Result<(ParamVector, ParamVector)> {
        let x = self.standardize(raw)?;
        let p = self.predict_standardized(&x)?;
        Ok((
            ParamVector::from_array(p.map(|q| q.mean)),
            ParamVector::from_array(p.map(|q| q.variance.sqrt())),
        ))
    }

    /// Ranking score of a candidate relative to the original, both raw.
    pub fn quality_score(&self, raw_low: &[f64], raw_cand: &[f64]) -> Result<f64> {
        let low = self.standardize(raw_low)?;
        let cand = self.standardize(raw_cand)?;
        self.rank.quality_score(&self.hyperparams, &low, &cand)
    }
}
