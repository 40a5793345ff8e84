//! Kernel rank-SVM over "worse minus better" feature differences.
//!
//! Every ordering constraint between a low image, its high-quality and its
//! poor-quality counterparts becomes one difference vector `D_i`. The dual
//! is the box-constrained concave QP
//!
//! ```text
//! max  1'a - 0.5 a' K a    s.t.  0 <= a_i <= C
//! ```
//!
//! with `K` the noisy gram over the differences. It is solved by cyclic
//! coordinate ascent with exact per-coordinate maximization.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{self, Hyperparams};
use crate::matrix::FeatureMatrix;

/// Where a difference vector came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    /// `f_i - f_ij+`
    LowHigh { image: usize, high: usize },
    /// `f_ik- - f_i`
    PoorLow { image: usize, poor: usize },
    /// `f_ik- - f_ij+`
    PoorHigh { image: usize, poor: usize, high: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DifferenceSet {
    pub vectors: FeatureMatrix,
    pub provenance: Vec<Provenance>,
    /// Counterparts per class.
    pub p: usize,
}

impl DifferenceSet {
    pub fn len(&self) -> usize {
        self.vectors.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// `N (2p + p^2)`.
    pub fn expected_len(n_images: usize, p: usize) -> usize {
        n_images * (2 * p + p * p)
    }
}

/// Checks that every image has exactly `p` counterparts of each class and
/// returns `p`.
pub(crate) fn uniform_counterparts(
    n_low: usize,
    high: &[FeatureMatrix],
    poor: &[FeatureMatrix],
) -> Result<usize> {
    if high.len() != n_low || poor.len() != n_low {
        return Err(Error::RaggedCounterparts(format!(
            "{n_low} low images but {} high and {} poor groups",
            high.len(),
            poor.len()
        )));
    }
    let p = high.first().map_or(0, FeatureMatrix::rows);
    for (i, (hi, po)) in high.iter().zip(poor).enumerate() {
        if hi.rows() != p || po.rows() != p {
            return Err(Error::RaggedCounterparts(format!(
                "image {i} has {} high and {} poor counterparts, expected {p} of each",
                hi.rows(),
                po.rows()
            )));
        }
    }
    Ok(p)
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Builds the difference set. Order: for each image, the `p` low-high
/// differences, then `p` poor-low, then `p^2` poor-high with the high index
/// outermost.
pub fn build_differences(
    low: &FeatureMatrix,
    high: &[FeatureMatrix],
    poor: &[FeatureMatrix],
) -> Result<DifferenceSet> {
    let p = uniform_counterparts(low.rows(), high, poor)?;
    let mut vectors = FeatureMatrix::zeros(0, low.cols());
    let mut provenance = Vec::with_capacity(DifferenceSet::expected_len(low.rows(), p));
    for i in 0..low.rows() {
        let f = low.row(i);
        for j in 0..p {
            vectors.push_row(&diff(f, high[i].row(j)))?;
            provenance.push(Provenance::LowHigh { image: i, high: j });
        }
        for k in 0..p {
            vectors.push_row(&diff(poor[i].row(k), f))?;
            provenance.push(Provenance::PoorLow { image: i, poor: k });
        }
        for j in 0..p {
            for k in 0..p {
                vectors.push_row(&diff(poor[i].row(k), high[i].row(j)))?;
                provenance.push(Provenance::PoorHigh { image: i, poor: k, high: j });
            }
        }
    }
    Ok(DifferenceSet { vectors, provenance, p })
}

/// Stopping rule of the coordinate-ascent solver.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DualSolverOptions {
    pub kkt_tol: f64,
    pub max_sweeps: usize,
}

impl Default for DualSolverOptions {
    fn default() -> Self {
        Self {
            kkt_tol: 1e-5,
            max_sweeps: 500,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub sweeps: usize,
    pub max_violation: f64,
    /// Dual objective after each sweep.
    pub objective_trace: Vec<f64>,
}

pub fn dual_objective(k: &DMatrix<f64>, alpha: &[f64]) -> f64 {
    let a = nalgebra::DVector::from_column_slice(alpha);
    a.sum() - 0.5 * a.dot(&(k * &a))
}

fn violation(g: f64, a: f64, c: f64) -> f64 {
    if a <= 0.0 {
        g.max(0.0)
    } else if a >= c {
        (-g).max(0.0)
    } else {
        g.abs()
    }
}

/// Largest KKT violation of `alpha` for the box QP with gram `k`.
pub fn kkt_violation(k: &DMatrix<f64>, alpha: &[f64], c: f64) -> f64 {
    let a = nalgebra::DVector::from_column_slice(alpha);
    let g = k * &a;
    alpha
        .iter()
        .enumerate()
        .map(|(i, &ai)| violation(1.0 - g[i], ai, c))
        .fold(0.0, f64::max)
}

/// Cyclic coordinate ascent on `max 1'a - 0.5 a'Ka`, `0 <= a <= c`.
pub fn solve_box_qp(k: &DMatrix<f64>, c: f64, opts: DualSolverOptions) -> DualSolution {
    let n = k.nrows();
    let mut alpha = vec![0.0; n];
    // g = 1 - K a
    let mut g = vec![1.0; n];
    let mut objective_trace = Vec::new();
    let mut max_violation = g
        .iter()
        .zip(&alpha)
        .map(|(&gi, &ai)| violation(gi, ai, c))
        .fold(0.0, f64::max);
    let mut sweeps = 0;
    while sweeps < opts.max_sweeps && max_violation >= opts.kkt_tol {
        for i in 0..n {
            let kii = k[(i, i)];
            let new = (alpha[i] + g[i] / kii).clamp(0.0, c);
            let delta = new - alpha[i];
            if delta != 0.0 {
                alpha[i] = new;
                for (gj, kji) in g.iter_mut().zip(k.column(i).iter()) {
                    *gj -= kji * delta;
                }
            }
        }
        sweeps += 1;
        objective_trace.push(dual_objective(k, &alpha));
        max_violation = g
            .iter()
            .zip(&alpha)
            .map(|(&gi, &ai)| violation(gi, ai, c))
            .fold(0.0, f64::max);
    }
    DualSolution {
        alpha,
        sweeps,
        max_violation,
        objective_trace,
    }
}

/// Ranking coefficients over a difference set.
#[derive(Clone, Debug, PartialEq)]
pub struct RankModel {
    pub alpha: Vec<f64>,
    pub c: f64,
    pub differences: DifferenceSet,
}

pub fn solve_dual(dset: &DifferenceSet, h: &Hyperparams, c: f64) -> Result<RankModel> {
    solve_dual_with(dset, h, c, DualSolverOptions::default()).map(|(m, _)| m)
}

pub fn solve_dual_with(
    dset: &DifferenceSet,
    h: &Hyperparams,
    c: f64,
    opts: DualSolverOptions,
) -> Result<(RankModel, DualSolution)> {
    if !(c >= 0.0) {
        return Err(Error::InvalidConfig(format!("box bound C must be >= 0, got {c}")));
    }
    let k = kernel::gram_self(&dset.vectors, h, true).values;
    let sol = solve_box_qp(&k, c, opts);
    Ok((
        RankModel {
            alpha: sol.alpha.clone(),
            c,
            differences: dset.clone(),
        },
        sol,
    ))
}

impl RankModel {
    /// Score of `f_cand` relative to `f_low`: `sum_i a_i k(D_i, f_low - f_cand)`.
    /// Higher means more enhancement-like.
    pub fn quality_score(&self, h: &Hyperparams, f_low: &[f64], f_cand: &[f64]) -> Result<f64> {
        if f_low.len() != h.dim() || f_cand.len() != h.dim() {
            return Err(Error::DimensionMismatch {
                expected: h.dim(),
                found: if f_low.len() != h.dim() { f_low.len() } else { f_cand.len() },
            });
        }
        let rel = diff(f_low, f_cand);
        let theta = h.theta();
        let sf2 = h.sigma_f2();
        Ok(self
            .alpha
            .iter()
            .zip(self.differences.vectors.iter_rows())
            .filter(|(a, _)| **a != 0.0)
            .map(|(a, d)| a * kernel::se_value(d, &rel, &theta, sf2))
            .sum())
    }

    /// Candidate indices sorted by descending score; ties keep input order.
    pub fn rank_candidates<C: AsRef<[f64]>>(
        &self,
        h: &Hyperparams,
        f_low: &[f64],
        candidates: &[C],
    ) -> Result<Vec<usize>> {
        let scores = candidates
            .iter()
            .map(|c| self.quality_score(h, f_low, c.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        rank_by_score(&scores)
    }
}

/// Stable descending argsort.
pub fn rank_by_score(scores: &[f64]) -> Result<Vec<usize>> {
    if scores.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    Ok(idx)
}
