use crate::error::{Error, Result};
use crate::features::{ParamVector, StandardizationStats};
use crate::gp::{self, GpHead};
use crate::kernel::Hyperparams;
use crate::matrix::FeatureMatrix;
use crate::ranking::{self, DualSolverOptions, RankModel};
use crate::traversal::TraversalConfig;

use super::objective::{self, JointProblem};
use super::scg::{scg_minimize, ScgOptions};
use super::TrainedModel;

/// Raw (unstandardized) training features and regression targets.
#[derive(Clone, Debug)]
pub struct TrainingSet {
    pub low: FeatureMatrix,
    /// `p` high-quality counterparts per low image.
    pub high: Vec<FeatureMatrix>,
    /// `p` poor-quality counterparts per low image.
    pub poor: Vec<FeatureMatrix>,
    /// Parameters of the first high-quality counterpart of each low image.
    pub targets: Vec<ParamVector>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointConfig {
    pub c: f64,
    pub max_cycles: usize,
    /// Stop when `|Z_k - Z_{k-1}|` between consecutive cycles drops below this.
    pub tol: f64,
    /// SCG iterations per hyperparameter step.
    pub scg_iters: usize,
    pub cluster_weight: f64,
    pub dual: DualSolverOptions,
    pub traversal: TraversalConfig,
}

impl Default for JointConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            max_cycles: 20,
            tol: 1e-3,
            scg_iters: 50,
            cluster_weight: 1.0,
            dual: DualSolverOptions::default(),
            traversal: TraversalConfig::default(),
        }
    }
}

/// One alternation of the training loop.
#[derive(Clone, Debug, PartialEq)]
pub struct CycleRecord {
    pub cycle: usize,
    /// Objective after the ranking coefficients were re-solved.
    pub z_after_alpha: f64,
    /// Objective after the hyperparameter step.
    pub z_after_h: f64,
    /// Change of the end-of-cycle objective against the previous cycle
    /// (against the initial objective for the first cycle).
    pub delta_z: f64,
    pub dual_sweeps: usize,
    pub kkt_violation: f64,
    pub scg_iterations: usize,
    /// Objective after every accepted SCG step of this cycle.
    pub scg_trace: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingLog {
    pub z_initial: f64,
    pub cycles: Vec<CycleRecord>,
    pub converged: bool,
}

/// Starting point: `theta_d = 1/D`, `sf2` = mean target variance over the
/// heads, `sy2 = 0.1 sf2`.
pub fn initial_hyperparams(dim: usize, centered_targets: &[Vec<f64>]) -> Hyperparams {
    let var = centered_targets
        .iter()
        .map(|t| t.iter().map(|v| v * v).sum::<f64>() / t.len().max(1) as f64)
        .sum::<f64>()
        / centered_targets.len().max(1) as f64;
    let sf2 = var.max(1e-8);
    Hyperparams::isotropic(dim, sf2, 1.0 / dim as f64, 0.1 * sf2)
}

fn check_not_degenerate(set: &TrainingSet) -> Result<()> {
    if set.low.rows() < 2 {
        return Err(Error::DegenerateTrainingSet(format!(
            "need at least 2 low images, found {}",
            set.low.rows()
        )));
    }
    if set.targets.len() != set.low.rows() {
        return Err(Error::DimensionMismatch {
            expected: set.low.rows(),
            found: set.targets.len(),
        });
    }
    let p = ranking::uniform_counterparts(set.low.rows(), &set.high, &set.poor)?;
    if p == 0 {
        return Err(Error::DegenerateTrainingSet("no counterparts".into()));
    }
    let first = set.low.row(0);
    let all_same = set
        .low
        .iter_rows()
        .chain(set.high.iter().flat_map(FeatureMatrix::iter_rows))
        .chain(set.poor.iter().flat_map(FeatureMatrix::iter_rows))
        .all(|r| r == first);
    if all_same {
        return Err(Error::DegenerateTrainingSet("all features identical".into()));
    }
    Ok(())
}

/// Standardizes every feature set with statistics fitted on all training
/// images, and centers the targets.
pub fn prepare_problem(set: &TrainingSet, cluster_weight: f64) -> Result<(JointProblem, StandardizationStats, Vec<f64>)> {
    check_not_degenerate(set)?;
    let stats = StandardizationStats::fit(
        set.low
            .iter_rows()
            .chain(set.high.iter().flat_map(FeatureMatrix::iter_rows))
            .chain(set.poor.iter().flat_map(FeatureMatrix::iter_rows)),
    )?;
    let low = stats.apply_all(&set.low)?;
    let high = set.high.iter().map(|m| stats.apply_all(m)).collect::<Result<Vec<_>>>()?;
    let poor = set.poor.iter().map(|m| stats.apply_all(m)).collect::<Result<Vec<_>>>()?;
    let mut targets = Vec::with_capacity(3);
    let mut means = Vec::with_capacity(3);
    for m in 0..3 {
        let raw: Vec<f64> = set.targets.iter().map(|t| t.get(m)).collect();
        let mean = raw.iter().sum::<f64>() / raw.len() as f64;
        targets.push(raw.iter().map(|v| v - mean).collect());
        means.push(mean);
    }
    let problem = JointProblem::new(low, high, poor, targets, cluster_weight)?;
    Ok((problem, stats, means))
}

/// Alternates an exact ranking-dual solve at fixed hyperparameters with an
/// SCG step on the hyperparameters at fixed ranking coefficients.
pub fn train_joint(set: &TrainingSet, config: &JointConfig) -> Result<(TrainedModel, TrainingLog)> {
    if config.max_cycles == 0 {
        return Err(Error::InvalidConfig("max_cycles must be at least 1".into()));
    }
    let (problem, stats, means) = prepare_problem(set, config.cluster_weight)?;
    let mut h = initial_hyperparams(problem.dim(), &problem.targets);
    let mut alpha = vec![0.0; problem.differences.len()];
    let mut log = TrainingLog {
        z_initial: objective::objective(&problem, &h, &alpha)?,
        ..Default::default()
    };
    let mut z_prev = log.z_initial;

    for cycle in 1..=config.max_cycles {
        let (rank, sol) = ranking::solve_dual_with(&problem.differences, &h, config.c, config.dual)?;
        alpha = rank.alpha;
        let z_after_alpha = objective::objective(&problem, &h, &alpha)?;

        let res = scg_minimize(
            |x| objective::objective(&problem, &Hyperparams::from_vec(x), &alpha),
            |x| objective::objective_grad(&problem, &Hyperparams::from_vec(x), &alpha),
            &h.to_vec(),
            ScgOptions {
                max_iter: config.scg_iters,
                grad_tol: 1e-8,
            },
        )?;
        h = Hyperparams::from_vec(&res.x);
        let delta_z = res.f - z_prev;
        log.cycles.push(CycleRecord {
            cycle,
            z_after_alpha,
            z_after_h: res.f,
            delta_z,
            dual_sweeps: sol.sweeps,
            kkt_violation: sol.max_violation,
            scg_iterations: res.iterations,
            scg_trace: res.accepted,
        });
        z_prev = res.f;
        if delta_z.abs() < config.tol {
            log.converged = true;
            break;
        }
    }

    // Re-solve so the stored coefficients are optimal for the stored kernel.
    let rank = ranking::solve_dual_with(&problem.differences, &h, config.c, config.dual)?.0;
    let model = assemble_model(problem, stats, &means, h, rank, config.traversal.clone())?;
    Ok((model, log))
}

pub(crate) fn assemble_model(
    problem: JointProblem,
    stats: StandardizationStats,
    means: &[f64],
    h: Hyperparams,
    rank: RankModel,
    traversal: TraversalConfig,
) -> Result<TrainedModel> {
    let heads = (0..3)
        .map(|m| {
            let raw: Vec<f64> = problem.targets[m].iter().map(|v| v + means[m]).collect();
            gp::fit_head(&problem.low, &raw, m, &h)
        })
        .collect::<Result<Vec<GpHead>>>()?;
    Ok(TrainedModel {
        hyperparams: h,
        heads,
        rank,
        stats,
        train_features: problem.low,
        traversal,
    })
}
