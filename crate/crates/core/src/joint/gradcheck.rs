//! Finite-difference verification of the analytic objective gradient.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::kernel::Hyperparams;
use crate::matrix::FeatureMatrix;

use super::objective::{objective, objective_grad, JointProblem};

/// Central-difference step in log-hyperparameter space.
pub const FD_STEP: f64 = 1e-5;
/// Pass threshold on the largest relative error.
pub const MAX_REL_ERROR: f64 = 1e-5;
/// Denominator floor so that near-zero components are compared absolutely.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckInstance {
    pub seed: u64,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    pub max_rel_error: f64,
}

impl GradCheckInstance {
    pub fn passed(&self) -> bool {
        self.max_rel_error < MAX_REL_ERROR
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub instances: Vec<GradCheckInstance>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.instances.iter().all(GradCheckInstance::passed)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.instances.iter().map(|i| i.max_rel_error).fold(0.0, f64::max)
    }
}

fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> FeatureMatrix {
    FeatureMatrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

/// Random problem with `n` low images of dimension `d` and `p` counterparts,
/// plus a random hyperparameter point and ranking coefficients in `[0, 1]`.
pub fn random_instance(seed: u64, n: usize, d: usize, p: usize) -> Result<(JointProblem, Hyperparams, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let low = random_matrix(n, d, &mut rng);
    let high = (0..n).map(|_| random_matrix(p, d, &mut rng)).collect();
    let poor = (0..n).map(|_| random_matrix(p, d, &mut rng)).collect();
    let targets = (0..3)
        .map(|_| {
            let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let mean = raw.iter().sum::<f64>() / n as f64;
            raw.iter().map(|v| v - mean).collect()
        })
        .collect();
    let problem = JointProblem::new(low, high, poor, targets, 1.0)?;
    let theta: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.5f64..0.5).exp()).collect();
    let h = Hyperparams::new(
        rng.gen_range(-1.0f64..1.0).exp(),
        &theta,
        rng.gen_range(-3.0f64..-1.0).exp(),
    );
    let alpha = (0..problem.differences.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
    Ok((problem, h, alpha))
}

/// Compares the analytic gradient with central differences at one point.
pub fn check_point(problem: &JointProblem, h: &Hyperparams, alpha: &[f64]) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let analytic = objective_grad(problem, h, alpha)?;
    let base = h.to_vec();
    let mut numeric = Vec::with_capacity(base.len());
    for c in 0..base.len() {
        let mut plus = base.clone();
        let mut minus = base.clone();
        plus[c] += FD_STEP;
        minus[c] -= FD_STEP;
        let fp = objective(problem, &Hyperparams::from_vec(&plus), alpha)?;
        let fm = objective(problem, &Hyperparams::from_vec(&minus), alpha)?;
        numeric.push((fp - fm) / (2.0 * FD_STEP));
    }
    let max_rel = analytic
        .iter()
        .zip(&numeric)
        .map(|(a, f)| (a - f).abs() / a.abs().max(f.abs()).max(REL_FLOOR))
        .fold(0.0, f64::max);
    Ok((analytic, numeric, max_rel))
}

/// Runs `instances` seeded checks (`N = 6`, `D = 5`, `p = 2`); instance `i`
/// uses seed `seed + i`.
pub fn gradient_check(seed: u64, instances: usize) -> Result<GradCheckReport> {
    let instances = (0..instances as u64)
        .map(|i| {
            let s = seed.wrapping_add(i);
            let (problem, h, alpha) = random_instance(s, 6, 5, 2)?;
            let (analytic, numeric, max_rel_error) = check_point(&problem, &h, &alpha)?;
            Ok(GradCheckInstance {
                seed: s,
                analytic,
                numeric,
                max_rel_error,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GradCheckReport { instances })
}
