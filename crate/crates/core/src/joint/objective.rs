//! The combined training objective over kernel hyperparameters:
//!
//! ```text
//! Z(h) = sum_m [ 0.5 y_m' K^-1 y_m + 0.5 log|K| ]      regression, K over F
//!      - 1'a + 0.5 a' K_D a                           ranking, K_D over differences
//!      + w * sum_i ( |K(F_i+, F_i+)|_F^2 - |K(F_i+, F_i-)|_F^2 )   cluster
//! ```
//!
//! `K` and `K_D` carry `sy2` on their diagonals; the cluster blocks do not.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::gp::{cholesky_with_jitter, log_det};
use crate::kernel::{self, contract_log_grads, Hyperparams};
use crate::matrix::FeatureMatrix;
use crate::ranking::{self, DifferenceSet};

/// Standardized training data the objective is evaluated on.
#[derive(Clone, Debug)]
pub struct JointProblem {
    pub low: FeatureMatrix,
    pub high: Vec<FeatureMatrix>,
    pub poor: Vec<FeatureMatrix>,
    pub differences: DifferenceSet,
    /// Centered regression targets, one vector per parameter head.
    pub targets: Vec<Vec<f64>>,
    pub cluster_weight: f64,
}

impl JointProblem {
    pub fn new(
        low: FeatureMatrix,
        high: Vec<FeatureMatrix>,
        poor: Vec<FeatureMatrix>,
        targets: Vec<Vec<f64>>,
        cluster_weight: f64,
    ) -> Result<Self> {
        let differences = ranking::build_differences(&low, &high, &poor)?;
        for t in &targets {
            if t.len() != low.rows() {
                return Err(crate::Error::DimensionMismatch {
                    expected: low.rows(),
                    found: t.len(),
                });
            }
        }
        Ok(Self {
            low,
            high,
            poor,
            differences,
            targets,
            cluster_weight,
        })
    }

    pub fn dim(&self) -> usize {
        self.low.cols()
    }
}

/// The three addends of the objective.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveTerms {
    pub regression: f64,
    pub ranking: f64,
    /// Unweighted cluster term.
    pub cluster: f64,
}

impl ObjectiveTerms {
    pub fn total(&self, cluster_weight: f64) -> f64 {
        self.regression + self.ranking + cluster_weight * self.cluster
    }
}

/// `sum_i |K(F_i+, F_i+)|_F^2 - |K(F_i+, F_i-)|_F^2` with noise-free kernels.
pub fn cluster_term(high: &[FeatureMatrix], poor: &[FeatureMatrix], h: &Hyperparams) -> Result<f64> {
    ranking::uniform_counterparts(high.len(), high, poor)?;
    let mut total = 0.0;
    for (hi, po) in high.iter().zip(poor) {
        let same = kernel::self_values(hi, h);
        let cross = kernel::cross_values(hi, po, h);
        total += same.norm_squared() - cross.norm_squared();
    }
    Ok(total)
}

fn regression_parts(problem: &JointProblem, h: &Hyperparams) -> Result<(f64, DMatrix<f64>, nalgebra::Cholesky<f64, nalgebra::Dyn>, Vec<DVector<f64>>)> {
    let k = kernel::self_values(&problem.low, h);
    let mut ky = k.clone();
    let sy2 = h.sigma_y2();
    for i in 0..ky.nrows() {
        ky[(i, i)] += sy2;
    }
    let chol = cholesky_with_jitter(ky)?;
    let ld = log_det(&chol);
    let mut value = 0.0;
    let mut solved = Vec::with_capacity(problem.targets.len());
    for y in &problem.targets {
        let yv = DVector::from_column_slice(y);
        let a = chol.solve(&yv);
        value += 0.5 * yv.dot(&a) + 0.5 * ld;
        solved.push(a);
    }
    Ok((value, k, chol, solved))
}

fn ranking_value(kd: &DMatrix<f64>, alpha: &[f64]) -> f64 {
    -ranking::dual_objective(kd, alpha)
}

fn noisy(mut k: DMatrix<f64>, sy2: f64) -> DMatrix<f64> {
    for i in 0..k.nrows() {
        k[(i, i)] += sy2;
    }
    k
}

/// Each addend of `Z` at `(h, alpha)`.
pub fn objective_terms(problem: &JointProblem, h: &Hyperparams, alpha: &[f64]) -> Result<ObjectiveTerms> {
    let (regression, ..) = regression_parts(problem, h)?;
    let kd = kernel::gram_self(&problem.differences.vectors, h, true).values;
    Ok(ObjectiveTerms {
        regression,
        ranking: ranking_value(&kd, alpha),
        cluster: cluster_term(&problem.high, &problem.poor, h)?,
    })
}

pub fn objective(problem: &JointProblem, h: &Hyperparams, alpha: &[f64]) -> Result<f64> {
    Ok(objective_terms(problem, h, alpha)?.total(problem.cluster_weight))
}

/// Gradient of `Z` over the packed log-hyperparameters, by the chain rule
/// `dZ/dh = sum_ctx tr[(dZ/dK_ctx)' dK_ctx/dh]`.
pub fn objective_grad(problem: &JointProblem, h: &Hyperparams, alpha: &[f64]) -> Result<Vec<f64>> {
    Ok(value_and_grad(problem, h, alpha)?.1)
}

pub fn value_and_grad(problem: &JointProblem, h: &Hyperparams, alpha: &[f64]) -> Result<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; h.n_params()];

    // regression: dZ/dK = sum_m 0.5 (K^-1 - a_m a_m')
    let (reg_value, k, chol, solved) = regression_parts(problem, h)?;
    let n = k.nrows();
    let mut w = chol.inverse() * (0.5 * solved.len() as f64);
    for a in &solved {
        w -= 0.5 * a * a.transpose();
    }
    contract_log_grads(&problem.low, &problem.low, &k, &w, h, true, &mut grad);
    debug_assert_eq!(w.nrows(), n);

    // ranking: dZ/dK_D = 0.5 a a'
    let diffs = &problem.differences.vectors;
    let kd = kernel::self_values(diffs, h);
    let rank_value = ranking_value(&noisy(kd.clone(), h.sigma_y2()), alpha);
    let av = DVector::from_column_slice(alpha);
    let wd = 0.5 * &av * av.transpose();
    contract_log_grads(diffs, diffs, &kd, &wd, h, true, &mut grad);

    // cluster: dZ/dK_same = 2 K_same, dZ/dK_cross = -2 K_cross
    let cw = problem.cluster_weight;
    let mut cluster = 0.0;
    if cw != 0.0 {
        for (hi, po) in problem.high.iter().zip(&problem.poor) {
            let same = kernel::self_values(hi, h);
            let cross = kernel::cross_values(hi, po, h);
            cluster += same.norm_squared() - cross.norm_squared();
            contract_log_grads(hi, hi, &same, &(2.0 * cw * &same), h, false, &mut grad);
            contract_log_grads(hi, po, &cross, &(-2.0 * cw * &cross), h, false, &mut grad);
        }
    }

    Ok((reg_value + rank_value + cw * cluster, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_set(n: usize, d: usize, rng: &mut ChaCha8Rng) -> FeatureMatrix {
        FeatureMatrix::from_vec(n, d, (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }

    #[test]
    fn identical_blocks_cancel() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let high: Vec<_> = (0..3).map(|_| random_set(2, 4, &mut rng)).collect();
        let h = Hyperparams::isotropic(4, 1.3, 0.6, 0.1);
        assert_eq!(cluster_term(&high, &high.clone(), &h).unwrap(), 0.0);
    }

    #[test]
    fn single_pair_closed_form() {
        let hi = vec![FeatureMatrix::from_vec(1, 2, vec![0.2, -0.4])];
        let po = vec![FeatureMatrix::from_vec(1, 2, vec![1.0, 0.3])];
        let h = Hyperparams::new(1.7, &[0.5, 2.0], 0.1);
        let quad = 0.5 * 0.8f64.powi(2) + 2.0 * 0.7f64.powi(2);
        let expect = 1.7f64.powi(2) * (1.0 - (-quad).exp());
        assert!((cluster_term(&hi, &po, &h).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn permuting_high_counterparts_keeps_cluster_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let high: Vec<_> = (0..2).map(|_| random_set(3, 3, &mut rng)).collect();
        let poor: Vec<_> = (0..2).map(|_| random_set(3, 3, &mut rng)).collect();
        let h = Hyperparams::isotropic(3, 0.9, 0.8, 0.1);
        let a = cluster_term(&high, &poor, &h).unwrap();
        let permuted: Vec<_> = high.iter().map(|m| m.select(&[2, 0, 1])).collect();
        let b = cluster_term(&permuted, &poor, &h).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn value_and_grad_agree_with_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let low = random_set(4, 3, &mut rng);
        let high: Vec<_> = (0..4).map(|_| random_set(2, 3, &mut rng)).collect();
        let poor: Vec<_> = (0..4).map(|_| random_set(2, 3, &mut rng)).collect();
        let targets = vec![vec![0.1, -0.1, 0.05, -0.05]; 3];
        let problem = JointProblem::new(low, high, poor, targets, 1.0).unwrap();
        let h = Hyperparams::isotropic(3, 0.5, 0.4, 0.05);
        let alpha: Vec<f64> = (0..problem.differences.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
        let (v, _) = value_and_grad(&problem, &h, &alpha).unwrap();
        assert!((v - objective(&problem, &h, &alpha).unwrap()).abs() < 1e-10);
    }
}
