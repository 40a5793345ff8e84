//! Photo enhancement by joint Gaussian-process regression and pairwise
//! ranking over a shared squared-exponential ARD kernel.
//!
//! A trained model predicts target saturation, brightness and contrast for a
//! low-quality image, renders a grid of candidate adjustments around the
//! prediction and orders them with a ranking function learned from
//! better/worse counterpart pairs.

pub mod error;
pub mod features;
pub mod gp;
pub mod imaging;
pub mod joint;
pub mod kernel;
pub mod matrix;
pub mod pipeline;
pub mod ranking;
pub mod traversal;

pub use error::{Error, Result};
pub use features::{
    extract_features, measure_params, FeatureVector, ParamVector, RasterImage, StandardizationStats,
    FEATURE_DIM,
};
pub use gp::{GpHead, Prediction};
pub use joint::{train_joint, JointConfig, TrainedModel, TrainingLog, TrainingSet};
pub use kernel::{GramMatrix, Hyperparams};
pub use matrix::FeatureMatrix;
pub use pipeline::{load_model, save_model, DatasetManifest};
pub use ranking::{DifferenceSet, Provenance, RankModel};
pub use traversal::{enhance, EnhanceResult, TraversalConfig};
