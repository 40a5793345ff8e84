//! Squared-exponential covariance with automatic relevance determination.
//!
//! `k(a, b) = sf2 * exp(-0.5 * sum_d theta_d * (a_d - b_d)^2) + sy2 * [same index]`
//!
//! All hyperparameters are stored as logarithms so that unconstrained
//! optimizers keep them positive. Derivatives are taken with respect to the
//! log coordinates.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

/// Log-parameterized kernel hyperparameters `{sf2, theta_1..theta_D, sy2}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Hyperparams {
    pub log_sigma_f2: f64,
    pub log_theta: Vec<f64>,
    pub log_sigma_y2: f64,
}

impl Hyperparams {
    pub fn new(sigma_f2: f64, theta: &[f64], sigma_y2: f64) -> Self {
        Self {
            log_sigma_f2: sigma_f2.ln(),
            log_theta: theta.iter().map(|t| t.ln()).collect(),
            log_sigma_y2: sigma_y2.ln(),
        }
    }

    /// Every ARD weight equal to `theta`.
    pub fn isotropic(dim: usize, sigma_f2: f64, theta: f64, sigma_y2: f64) -> Self {
        Self::new(sigma_f2, &vec![theta; dim], sigma_y2)
    }

    pub fn dim(&self) -> usize {
        self.log_theta.len()
    }

    pub fn sigma_f2(&self) -> f64 {
        self.log_sigma_f2.exp()
    }

    pub fn sigma_y2(&self) -> f64 {
        self.log_sigma_y2.exp()
    }

    pub fn theta(&self) -> Vec<f64> {
        self.log_theta.iter().map(|t| t.exp()).collect()
    }

    /// Number of free coordinates, `D + 2`.
    pub fn n_params(&self) -> usize {
        self.dim() + 2
    }

    /// Packs as `[log sf2, log theta_1.., log sy2]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        v.push(self.log_sigma_f2);
        v.extend_from_slice(&self.log_theta);
        v.push(self.log_sigma_y2);
        v
    }

    pub fn from_vec(v: &[f64]) -> Self {
        assert!(v.len() >= 2, "packed hyperparameters need at least 2 entries");
        Self {
            log_sigma_f2: v[0],
            log_theta: v[1..v.len() - 1].to_vec(),
            log_sigma_y2: v[v.len() - 1],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|v| v.is_finite())
    }
}

#[inline]
fn weighted_sq_dist(a: &[f64], b: &[f64], theta: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(theta)
        .map(|((x, y), t)| t * (x - y) * (x - y))
        .sum()
}

/// Noise-free kernel value between two vectors.
pub fn kernel_eval(a: &[f64], b: &[f64], h: &Hyperparams) -> Result<f64> {
    for v in [a, b] {
        if v.len() != h.dim() {
            return Err(Error::DimensionMismatch {
                expected: h.dim(),
                found: v.len(),
            });
        }
    }
    Ok(se_value(a, b, &h.theta(), h.sigma_f2()))
}

#[inline]
pub(crate) fn se_value(a: &[f64], b: &[f64], theta: &[f64], sigma_f2: f64) -> f64 {
    sigma_f2 * (-0.5 * weighted_sq_dist(a, b, theta)).exp()
}

/// Kernel matrix between two input sets.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    pub values: DMatrix<f64>,
    /// Left and right inputs are the same set.
    pub same_set: bool,
    pub noise_on_diagonal: bool,
}

fn check_dim(m: &FeatureMatrix, h: &Hyperparams) -> Result<()> {
    if !m.is_empty() && m.cols() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: m.cols(),
        });
    }
    Ok(())
}

/// Noise-free cross kernel, `a.rows() x b.rows()`.
pub(crate) fn cross_values(a: &FeatureMatrix, b: &FeatureMatrix, h: &Hyperparams) -> DMatrix<f64> {
    let theta = h.theta();
    let sf2 = h.sigma_f2();
    let rows: Vec<Vec<f64>> = (0..a.rows())
        .into_par_iter()
        .map(|i| {
            let ai = a.row(i);
            b.iter_rows().map(|bj| se_value(ai, bj, &theta, sf2)).collect()
        })
        .collect();
    DMatrix::from_fn(a.rows(), b.rows(), |i, j| rows[i][j])
}

/// Noise-free symmetric kernel of a set with itself.
pub(crate) fn self_values(a: &FeatureMatrix, h: &Hyperparams) -> DMatrix<f64> {
    let theta = h.theta();
    let sf2 = h.sigma_f2();
    let n = a.rows();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let ai = a.row(i);
            (i..n).map(|j| se_value(ai, a.row(j), &theta, sf2)).collect()
        })
        .collect();
    let mut k = DMatrix::zeros(n, n);
    for (i, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            k[(i, i + off)] = v;
            k[(i + off, i)] = v;
        }
    }
    k
}

/// Gram matrix between `a` and `b`. Noise is attached to index identity,
/// so it is only allowed when `a` and `b` are the same set.
pub fn gram(a: &FeatureMatrix, b: &FeatureMatrix, h: &Hyperparams, add_noise: bool) -> Result<GramMatrix> {
    check_dim(a, h)?;
    check_dim(b, h)?;
    let same_set = std::ptr::eq(a, b);
    if add_noise && !same_set {
        return Err(Error::NoiseOnCrossGram);
    }
    if same_set {
        return Ok(gram_self(a, h, add_noise));
    }
    Ok(GramMatrix {
        values: cross_values(a, b, h),
        same_set,
        noise_on_diagonal: false,
    })
}

pub fn gram_self(a: &FeatureMatrix, h: &Hyperparams, add_noise: bool) -> GramMatrix {
    let mut values = self_values(a, h);
    if add_noise {
        let sy2 = h.sigma_y2();
        for i in 0..a.rows() {
            values[(i, i)] += sy2;
        }
    }
    GramMatrix {
        values,
        same_set: true,
        noise_on_diagonal: add_noise,
    }
}

/// Derivatives of the noisy self-gram with respect to each log coordinate.
#[derive(Clone, Debug)]
pub struct GramGrads {
    pub d_log_sigma_f2: DMatrix<f64>,
    pub d_log_theta: Vec<DMatrix<f64>>,
    pub d_log_sigma_y2: DMatrix<f64>,
}

/// Explicit derivative matrices. Memory is `D * n^2`; the training loop uses
/// [`contract_log_grads`] instead.
pub fn gram_grads(a: &FeatureMatrix, h: &Hyperparams) -> GramGrads {
    let k = self_values(a, h);
    let n = a.rows();
    let theta = h.theta();
    let d_log_theta = theta
        .iter()
        .enumerate()
        .map(|(q, t)| {
            DMatrix::from_fn(n, n, |i, j| {
                let diff = a.row(i)[q] - a.row(j)[q];
                -0.5 * t * diff * diff * k[(i, j)]
            })
        })
        .collect();
    GramGrads {
        d_log_sigma_f2: k,
        d_log_theta,
        d_log_sigma_y2: DMatrix::from_diagonal_element(n, n, h.sigma_y2()),
    }
}

/// Accumulates `tr(W^T dK/dh)` for every log coordinate `h`, where `K` is the
/// gram between `a` and `b` (`kernel` holds its noise-free values) and
/// `weight` is `dZ/dK`. `noisy` marks a self-gram carrying `sy2` on its
/// diagonal. Results are added into `grad`, packed as in
/// [`Hyperparams::to_vec`].
pub fn contract_log_grads(
    a: &FeatureMatrix,
    b: &FeatureMatrix,
    kernel: &DMatrix<f64>,
    weight: &DMatrix<f64>,
    h: &Hyperparams,
    noisy: bool,
    grad: &mut [f64],
) {
    let d = h.dim();
    debug_assert_eq!(grad.len(), d + 2);
    let (n, m) = kernel.shape();
    let p = weight.component_mul(kernel);

    grad[0] += p.sum();

    let partial: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let ai = a.row(i);
            let mut acc = vec![0.0; d];
            for j in 0..m {
                let pij = p[(i, j)];
                if pij == 0.0 {
                    continue;
                }
                for ((s, x), y) in acc.iter_mut().zip(ai).zip(b.row(j)) {
                    let diff = x - y;
                    *s += pij * diff * diff;
                }
            }
            acc
        })
        .collect();
    let theta = h.theta();
    for q in 0..d {
        let total: f64 = partial.iter().map(|row| row[q]).sum();
        grad[1 + q] += -0.5 * theta[q] * total;
    }

    if noisy {
        grad[d + 1] += h.sigma_y2() * weight.trace();
    }
}
