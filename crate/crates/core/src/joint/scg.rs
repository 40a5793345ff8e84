//! Møller's scaled conjugate gradient.
//!
//! Curvature along the search direction is estimated from one extra gradient
//! evaluation at a nearby point, and a Levenberg-Marquardt style scale keeps
//! the local quadratic model positive definite. A step is accepted only when
//! it does not increase the objective.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScgOptions {
    pub max_iter: usize,
    /// Stop once the infinity norm of the gradient falls to this value.
    pub grad_tol: f64,
}

impl Default for ScgOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            grad_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScgResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_inf_norm: f64,
    pub iterations: usize,
    /// Objective value after every accepted step, starting with `f(x0)`.
    pub accepted: Vec<f64>,
    pub converged: bool,
}

const SIGMA0: f64 = 1e-4;
const BETA_MIN: f64 = 1e-15;
const BETA_MAX: f64 = 1e100;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn axpy(x: &[f64], t: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + t * b).collect()
}

fn finite_value(v: Result<f64>) -> Option<f64> {
    v.ok().filter(|f| f.is_finite())
}

fn finite_grad(g: Result<Vec<f64>>) -> Option<Vec<f64>> {
    g.ok().filter(|g| g.iter().all(|v| v.is_finite()))
}

/// Minimizes `f` with gradient `g` from `x0`. Failed or non-finite
/// evaluations away from `x0` are treated as rejected steps.
pub fn scg_minimize<F, G>(mut f: F, mut g: G, x0: &[f64], opts: ScgOptions) -> Result<ScgResult>
where
    F: FnMut(&[f64]) -> Result<f64>,
    G: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut f_old = finite_value(f(&x)).ok_or(Error::NonFiniteStart)?;
    let mut grad = finite_grad(g(&x)).ok_or(Error::NonFiniteStart)?;
    if grad.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: grad.len(),
        });
    }
    let mut accepted = vec![f_old];
    let mut d: Vec<f64> = grad.iter().map(|v| -v).collect();
    let mut success = true;
    let mut n_success = 0;
    let mut beta = 1.0;
    let (mut mu, mut kappa, mut gamma) = (0.0, 0.0, 0.0);

    let done = |grad: &[f64]| inf_norm(grad) <= opts.grad_tol;
    if done(&grad) {
        return Ok(ScgResult {
            grad_inf_norm: inf_norm(&grad),
            x,
            f: f_old,
            iterations: 0,
            accepted,
            converged: true,
        });
    }

    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        if success {
            mu = dot(&d, &grad);
            if mu >= 0.0 {
                d = grad.iter().map(|v| -v).collect();
                mu = dot(&d, &grad);
            }
            kappa = dot(&d, &d);
            if kappa < f64::MIN_POSITIVE {
                break;
            }
            let sigma = SIGMA0 / kappa.sqrt();
            let x_plus = axpy(&x, sigma, &d);
            gamma = match finite_grad(g(&x_plus)) {
                Some(g_plus) => {
                    let dg: Vec<f64> = g_plus.iter().zip(&grad).map(|(a, b)| a - b).collect();
                    dot(&d, &dg) / sigma
                }
                None => 0.0,
            };
        }

        let mut delta = gamma + beta * kappa;
        if delta <= 0.0 {
            delta = beta * kappa;
            beta -= gamma / kappa;
        }
        let step = -mu / delta;
        let x_new = axpy(&x, step, &d);
        let f_new = finite_value(f(&x_new));

        // Ratio of actual to predicted decrease.
        let ratio = match f_new {
            Some(fv) => 2.0 * (fv - f_old) / (step * mu),
            None => -1.0,
        };
        let mut grad_old = None;
        if ratio >= 0.0 {
            let fv = f_new.expect("ratio >= 0 implies a finite value");
            match finite_grad(g(&x_new)) {
                Some(g_new) => {
                    success = true;
                    n_success += 1;
                    x = x_new;
                    f_old = fv;
                    accepted.push(fv);
                    grad_old = Some(std::mem::replace(&mut grad, g_new));
                }
                None => success = false,
            }
        } else {
            success = false;
        }

        if success && done(&grad) {
            return Ok(ScgResult {
                grad_inf_norm: inf_norm(&grad),
                x,
                f: f_old,
                iterations,
                accepted,
                converged: true,
            });
        }

        if ratio < 0.25 {
            beta = (4.0 * beta).min(BETA_MAX);
        }
        if ratio > 0.75 {
            beta = (0.5 * beta).max(BETA_MIN);
        }

        if n_success == n {
            d = grad.iter().map(|v| -v).collect();
            n_success = 0;
        } else if let Some(go) = grad_old {
            let diff: Vec<f64> = go.iter().zip(&grad).map(|(a, b)| a - b).collect();
            let coef = dot(&diff, &grad) / mu;
            d = d.iter().zip(&grad).map(|(di, gi)| coef * di - gi).collect();
        }
    }

    Ok(ScgResult {
        grad_inf_norm: inf_norm(&grad),
        converged: done(&grad),
        x,
        f: f_old,
        iterations,
        accepted,
    })
}
