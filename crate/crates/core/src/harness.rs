//! Monte Carlo replication runner and accuracy metrics.
//!
//! Each replication draws a fresh dataset from a child seed, runs the
//! requested tasks and contributes one value per metric. Replications are
//! independent, so the loop parallelizes freely; results are keyed by
//! replication index and aggregated in that fixed order.

use std::collections::BTreeMap;

use crate::dgp::{derive_child_seed, gen_dataset, DGPConfig, EffectLaw, GroundTruth};
use crate::fit::{detrend, fit_mefm, MEFMFit};
use crate::fmtest::run_fm_vs_mefm_test;
use crate::inference::{hac_loading, loading_row_z, rotation_h, standardized_effect_stats, Side};
use crate::linalg::space_distance;
use crate::par;
use crate::rank::{select_ranks, DEFAULT_XI_SCALE};
use crate::{Error, Result};

/// Relative mean squared errors of a fit against ground truth. `None` marks a
/// component whose truth is identically zero (ratio undefined).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeMse {
    pub mu: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub common: Option<f64>,
}

/// Which per-replication computations to run.
#[derive(Debug, Clone, Default)]
pub struct Tasks {
    /// MEFM fit at the true ranks: relative MSEs and loading space distances.
    pub fit: bool,
    /// Eigenvalue-ratio rank selection: rank-pair frequencies.
    pub ranks: bool,
    /// FM-sufficiency test: rejection proportions.
    pub test: bool,
    /// Standardized statistics for the normality studies.
    pub normality: Option<NormalityTask>,
    /// Quantile level for the test task.
    pub theta: Option<f64>,
}

/// Configuration of the normality task: which statistics to record, all
/// 1-based as reported.
#[derive(Debug, Clone)]
pub struct NormalityTask {
    /// Time point the statistics are evaluated at (1-based).
    pub t: usize,
    /// Row-effect component for the alpha statistic (1-based).
    pub alpha_component: usize,
    /// Column-effect component for the beta statistic (1-based).
    pub beta_component: usize,
    /// Loading-row statistic: side, row index and component (1-based), with
    /// the HAC bandwidth left at its default.
    pub loading: Option<(Side, usize, usize)>,
}

impl Default for NormalityTask {
    fn default() -> Self {
        // t = 10, third components, first entry of the first column-loading row
        Self {
            t: 10,
            alpha_component: 3,
            beta_component: 3,
            loading: Some((Side::Column, 1, 1)),
        }
    }
}

/// Mean, standard deviation and median of a metric across replications.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Aggregate {
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
}

/// Per-replication metric lists plus aggregates and rank frequencies.
#[derive(Debug, Clone)]
pub struct ReplicationSummary {
    pub setting: String,
    /// Number of successful replications; every metric list has this length
    /// unless the metric was undefined for some replications.
    pub reps: usize,
    /// Replications that failed (singular fits etc.), excluded from metrics.
    pub failures: usize,
    /// Per-replication metric values, keyed by metric name.
    pub metrics: BTreeMap<String, Vec<f64>>,
    pub aggregates: BTreeMap<String, Aggregate>,
    /// Relative frequency of each selected rank pair (ranks task only).
    pub rank_frequencies: BTreeMap<(usize, usize), f64>,
}

impl ReplicationSummary {
    pub fn aggregate(&self, metric: &str) -> Option<&Aggregate> {
        self.aggregates.get(metric)
    }
}

/// The four relative MSE ratios, sums over time of squared errors divided by
/// sums of squared truths.
pub fn relative_mse(fit: &MEFMFit, truth: &GroundTruth) -> Result<RelativeMse> {
    let t_len = fit.common.len();
    if truth.common.len() != t_len
        || truth.effects.len() != fit.effects.len()
        || truth.common[0].shape() != fit.common[0].shape()
    {
        return Err(Error::DimensionMismatch(
            "fit and ground truth cover different data".into(),
        ));
    }
    let mut num = [0.0_f64; 4];
    let mut den = [0.0_f64; 4];
    for t in 0..t_len {
        let d_mu = fit.effects.mu[t] - truth.effects.mu[t];
        num[0] += d_mu * d_mu;
        den[0] += truth.effects.mu[t] * truth.effects.mu[t];
        num[1] += (&fit.effects.alpha[t] - &truth.effects.alpha[t]).norm_squared();
        den[1] += truth.effects.alpha[t].norm_squared();
        num[2] += (&fit.effects.beta[t] - &truth.effects.beta[t]).norm_squared();
        den[2] += truth.effects.beta[t].norm_squared();
        num[3] += (&fit.common[t] - &truth.common[t]).norm_squared();
        den[3] += truth.common[t].norm_squared();
    }
    let ratio = |i: usize| {
        if den[i] > 0.0 {
            Some(num[i] / den[i])
        } else {
            None
        }
    };
    Ok(RelativeMse {
        mu: ratio(0),
        alpha: ratio(1),
        beta: ratio(2),
        common: ratio(3),
    })
}

/// Runs `reps` replications of `config`, each with a deterministic child seed
/// of `master_seed`, and aggregates the requested metrics.
pub fn run_replications(
    config: &DGPConfig,
    reps: usize,
    tasks: &Tasks,
    master_seed: u64,
) -> Result<ReplicationSummary> {
    if reps == 0 {
        return Err(Error::InvalidParameter(
            "need at least one replication".into(),
        ));
    }
    let theta = tasks.theta.unwrap_or(0.95);
    let outcomes = par::map_indexed(reps, |r| {
        let mut rep_config = config.clone();
        rep_config.seed = derive_child_seed(master_seed, r as u64);
        run_one(&rep_config, tasks, theta)
    });

    let mut metrics: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut rank_counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut failures = 0usize;
    let mut successes = 0usize;
    for outcome in outcomes {
        match outcome {
            Ok(rep) => {
                successes += 1;
                for (name, value) in rep.values {
                    metrics.entry(name).or_default().push(value);
                }
                if let Some(pair) = rep.rank_pair {
                    *rank_counts.entry(pair).or_insert(0) += 1;
                }
            }
            Err(_) => failures += 1,
        }
    }
    if successes == 0 {
        return Err(Error::InvalidParameter(format!(
            "all {reps} replications failed"
        )));
    }

    let aggregates = metrics
        .iter()
        .map(|(name, values)| (name.clone(), aggregate(values)))
        .collect();
    let rank_frequencies = rank_counts
        .into_iter()
        .map(|(pair, count)| (pair, count as f64 / successes as f64))
        .collect();

    Ok(ReplicationSummary {
        setting: String::new(),
        reps: successes,
        failures,
        metrics,
        aggregates,
        rank_frequencies,
    })
}

struct RepOutcome {
    values: Vec<(String, f64)>,
    rank_pair: Option<(usize, usize)>,
}

fn run_one(config: &DGPConfig, tasks: &Tasks, theta: f64) -> Result<RepOutcome> {
    let (y, truth) = gen_dataset(config)?;
    let mut values = Vec::new();
    let mut rank_pair = None;

    if tasks.fit || tasks.normality.is_some() {
        let fit = fit_mefm(&y, Some(config.k_row), Some(config.k_col))?;
        if tasks.fit {
            let mse = relative_mse(&fit, &truth)?;
            if let Some(v) = mse.mu {
                values.push(("mse_mu".into(), v));
            }
            if let Some(v) = mse.alpha {
                values.push(("mse_alpha".into(), v));
            }
            if let Some(v) = mse.beta {
                values.push(("mse_beta".into(), v));
            }
            if let Some(v) = mse.common {
                values.push(("mse_common".into(), v));
            }
            values.push((
                "dist_q_row".into(),
                space_distance(&fit.q_row, &truth.a_row)?,
            ));
            values.push((
                "dist_q_col".into(),
                space_distance(&fit.q_col, &truth.a_col)?,
            ));
        }
        if let Some(norm) = &tasks.normality {
            let t = norm.t - 1;
            let z = standardized_effect_stats(&fit, t, Some(&truth.effects))?;
            values.push(("z_mu".into(), z.mu));
            values.push(("z_alpha".into(), z.alpha[norm.alpha_component - 1]));
            values.push(("z_beta".into(), z.beta[norm.beta_component - 1]));
            if let Some((side, j, component)) = norm.loading {
                let (h_row, h_col) =
                    rotation_h(&fit, &truth.q_row(), &truth.q_col(), &truth.factors_z())?;
                let (h, truth_q) = match side {
                    Side::Row => (h_row, truth.q_row()),
                    Side::Column => (h_col, truth.q_col()),
                };
                let hac = hac_loading(&fit, side, j - 1, None)?;
                let stat = loading_row_z(&fit, side, j - 1, &hac, &h, &truth_q)?;
                values.push(("z_loading".into(), stat.z[component - 1]));
            }
        }
    }

    if tasks.ranks {
        let sel = select_ranks(&detrend(&y), DEFAULT_XI_SCALE)?;
        rank_pair = Some((sel.k_row, sel.k_col));
    }

    if tasks.test {
        let result = run_fm_vs_mefm_test(&y, theta, None, None)?;
        values.push(("reject_alpha".into(), result.reject_alpha));
        values.push(("reject_beta".into(), result.reject_beta));
    }

    Ok(RepOutcome { values, rank_pair })
}

fn aggregate(values: &[f64]) -> Aggregate {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
    };
    Aggregate {
        mean,
        sd: var.sqrt(),
        median,
    }
}

/// One row of a power study: the signal value and the mean rejection rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerPoint {
    pub value: f64,
    pub reject_alpha: f64,
    pub reject_beta: f64,
}

/// Parameter swept by [`power_curve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerParam {
    UAlpha,
    UBeta,
    ULocalScale,
}

impl PowerParam {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "u_alpha" => Ok(Self::UAlpha),
            "u_beta" => Ok(Self::UBeta),
            "u_local_scale" => Ok(Self::ULocalScale),
            other => Err(Error::InvalidParameter(format!(
                "unknown power parameter `{other}`"
            ))),
        }
    }
}

/// Sweeps a signal parameter over `grid`, running the FM-sufficiency test
/// `reps` times per point, and reports mean rejection rates.
pub fn power_curve(
    base: &DGPConfig,
    param: PowerParam,
    grid: &[f64],
    reps: usize,
    theta: f64,
    master_seed: u64,
) -> Result<Vec<PowerPoint>> {
    let tasks = Tasks {
        test: true,
        theta: Some(theta),
        ..Default::default()
    };
    let mut points = Vec::with_capacity(grid.len());
    for (i, &value) in grid.iter().enumerate() {
        let mut config = base.clone();
        apply_power_param(&mut config, param, value)?;
        // separate seed stream per grid point
        let summary = run_replications(
            &config,
            reps,
            &tasks,
            derive_child_seed(master_seed, i as u64),
        )?;
        let reject_alpha = summary
            .aggregate("reject_alpha")
            .map(|a| a.mean)
            .unwrap_or(0.0);
        let reject_beta = summary
            .aggregate("reject_beta")
            .map(|a| a.mean)
            .unwrap_or(0.0);
        points.push(PowerPoint {
            value,
            reject_alpha,
            reject_beta,
        });
    }
    Ok(points)
}

fn apply_power_param(config: &mut DGPConfig, param: PowerParam, value: f64) -> Result<()> {
    match (param, &mut config.effect_law) {
        (PowerParam::UAlpha, EffectLaw::Rademacher { u_alpha, .. }) => *u_alpha = value,
        (PowerParam::UBeta, EffectLaw::Rademacher { u_beta, .. }) => *u_beta = value,
        (PowerParam::ULocalScale, law) => {
            *law = EffectLaw::FixedLocalPattern { scale: value };
        }
        (_, law) => {
            return Err(Error::InvalidParameter(format!(
                "parameter {param:?} does not apply to effect law {law:?}"
            )))
        }
    }
    Ok(())
}
