//! Monte Carlo replication loops and performance metrics.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LgmError, Result};
use crate::estimation::{fit_full, fit_reduced, FitOptions, FitResult, ImproperFlag, ParamEstimate};
use crate::model::{LongitudinalDataset, OriginalParams};
use crate::simgen::{gen_dataset, replication_seed, rng_from_seed, SimCondition};

/// Truth values below this magnitude switch bias and RMSE to absolute scale.
pub const ZERO_TRUTH: f64 = 1e-8;

/// Result of one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct RepOutcome {
    pub index: u64,
    pub seed: u64,
    pub converged: bool,
    pub used_reduced: bool,
    pub attempts_to_converge: usize,
    /// Flags of the random-knot fit.
    pub improper: BTreeSet<ImproperFlag>,
    /// Estimates in the interpretable space from the fit that was kept.
    pub estimates: Vec<ParamEstimate>,
    pub full_fit: Option<FitResult>,
}

impl RepOutcome {
    fn new(converged: bool) -> Self {
        Self {
            index: 0,
            seed: 0,
            converged,
            used_reduced: false,
            attempts_to_converge: 0,
            improper: BTreeSet::new(),
            estimates: Vec::new(),
            full_fit: None,
        }
    }
}

/// Anything that turns a simulated dataset into estimates.
pub trait Estimator: Sync {
    fn estimate(&self, dataset: &LongitudinalDataset, truth: &OriginalParams, seed: u64) -> RepOutcome;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Strategy {
    /// Random-knot model, refitting the fixed-knot model when the solution is improper.
    FullWithFallback,
    FullOnly,
    ReducedOnly,
}

/// Maximum likelihood estimator used by the simulation study.
#[derive(Debug, Clone)]
pub struct FimlEstimator {
    pub options: FitOptions,
    pub strategy: Strategy,
}

impl FimlEstimator {
    pub fn new(options: FitOptions, strategy: Strategy) -> Self {
        Self { options, strategy }
    }
}

impl Estimator for FimlEstimator {
    fn estimate(&self, dataset: &LongitudinalDataset, _truth: &OriginalParams, seed: u64) -> RepOutcome {
        let options = FitOptions {
            seed,
            ..self.options.clone()
        };
        let reduced_outcome = |out: &mut RepOutcome| match fit_reduced(dataset, &options) {
            Ok(fit) if fit.converged => {
                out.attempts_to_converge = out.attempts_to_converge.max(fit.attempts);
                out.estimates = fit.original_estimates.clone();
                out.used_reduced = true;
            }
            _ => out.converged = false,
        };
        match self.strategy {
            Strategy::ReducedOnly => {
                let mut out = RepOutcome::new(true);
                reduced_outcome(&mut out);
                out.used_reduced = false;
                out
            }
            Strategy::FullOnly | Strategy::FullWithFallback => {
                let Ok(fit) = fit_full(dataset, &options) else {
                    return RepOutcome::new(false);
                };
                if !fit.converged {
                    let mut out = RepOutcome::new(false);
                    out.full_fit = Some(fit);
                    return out;
                }
                let mut out = RepOutcome::new(true);
                out.attempts_to_converge = fit.attempts;
                out.improper = fit.improper.clone();
                out.estimates = fit.original_estimates.clone();
                let improper = fit.is_improper();
                out.full_fit = Some(fit);
                if improper && self.strategy == Strategy::FullWithFallback {
                    reduced_outcome(&mut out);
                }
                out
            }
        }
    }
}

/// Returns the population values, optionally scaled, with a fixed-width interval around the truth.
#[derive(Debug, Clone, Copy)]
pub struct TruthEstimator {
    pub scale: f64,
    pub half_width: f64,
}

impl Default for TruthEstimator {
    fn default() -> Self {
        Self {
            scale: 1.0,
            half_width: 0.1,
        }
    }
}

impl Estimator for TruthEstimator {
    fn estimate(&self, _dataset: &LongitudinalDataset, truth: &OriginalParams, _seed: u64) -> RepOutcome {
        let mut out = RepOutcome::new(true);
        out.attempts_to_converge = 1;
        out.estimates = truth
            .named_values()
            .into_iter()
            .map(|(name, v)| ParamEstimate {
                name,
                estimate: v * self.scale,
                se: Some(0.0),
                ci: Some((v - self.half_width, v + self.half_width)),
            })
            .collect();
        out
    }
}

/// Generate replication data from `seed` and estimate.
pub fn run_replication<E: Estimator + ?Sized>(cond: &SimCondition, seed: u64, estimator: &E) -> Result<RepOutcome> {
    let mut rng = rng_from_seed(seed);
    let (dataset, truth) = gen_dataset(cond, &mut rng)?;
    let mut out = estimator.estimate(&dataset, &truth, seed);
    out.seed = seed;
    Ok(out)
}

/// A metric value; `absolute` marks a zero truth where the relative scale is undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MetricValue {
    pub value: f64,
    pub absolute: bool,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn metric_relative_bias(estimates: &[f64], truth: f64) -> MetricValue {
    let bias = estimates.iter().map(|e| e - truth).sum::<f64>() / estimates.len() as f64;
    if truth.abs() < ZERO_TRUTH {
        MetricValue {
            value: bias,
            absolute: true,
        }
    } else {
        MetricValue {
            value: bias / truth + 0.0,
            absolute: false,
        }
    }
}

pub fn metric_empirical_se(estimates: &[f64]) -> Result<f64> {
    if estimates.len() < 2 {
        return Err(LgmError::TooFewReps {
            needed: 2,
            got: estimates.len(),
        });
    }
    // shifted mean, exact for constant input
    let k = estimates[0];
    let m = k + estimates.iter().map(|e| e - k).sum::<f64>() / estimates.len() as f64;
    let ss: f64 = estimates.iter().map(|e| (e - m).powi(2)).sum();
    Ok((ss / (estimates.len() - 1) as f64).sqrt())
}

pub fn metric_relative_rmse(estimates: &[f64], truth: f64) -> MetricValue {
    let rmse = (estimates.iter().map(|e| (e - truth).powi(2)).sum::<f64>() / estimates.len() as f64).sqrt();
    if truth.abs() < ZERO_TRUTH {
        MetricValue {
            value: rmse,
            absolute: true,
        }
    } else {
        MetricValue {
            value: rmse / truth + 0.0,
            absolute: false,
        }
    }
}

/// Share of closed intervals containing `truth`.
pub fn metric_coverage(cis: &[(f64, f64)], truth: f64) -> Result<f64> {
    if cis.is_empty() {
        return Err(LgmError::TooFewReps { needed: 1, got: 0 });
    }
    let hits = cis.iter().filter(|(lo, hi)| *lo <= truth && truth <= *hi).count();
    Ok(hits as f64 / cis.len() as f64)
}

/// Monte Carlo standard error of a bias estimate, `√(var/S)`.
pub fn mc_se_bias(variance: f64, s: usize) -> f64 {
    (variance / s as f64).sqrt()
}

/// Metrics of one parameter over the kept replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ParamMetrics {
    pub name: String,
    pub truth: f64,
    /// Replications that reported this parameter.
    pub count: usize,
    pub mean_estimate: f64,
    pub relative_bias: MetricValue,
    pub empirical_se: Option<f64>,
    pub relative_rmse: MetricValue,
    pub coverage: Option<f64>,
    pub mc_se_bias: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MetricsReport {
    pub condition: SimCondition,
    pub master_seed: u64,
    pub requested: usize,
    pub replications_attempted: usize,
    pub converged: usize,
    pub used_reduced: usize,
    pub improper_negative_variance: usize,
    pub improper_out_of_range: usize,
    /// Kept replications with at least one flag.
    pub improper_any: usize,
    pub parameters: Vec<ParamMetrics>,
}

impl MetricsReport {
    pub fn parameter(&self, name: &str) -> Option<&ParamMetrics> {
        self.parameters.iter().find(|p| p.name == name)
    }

    /// Share of kept replications whose random-knot fit was improper.
    pub fn improper_rate(&self) -> f64 {
        if self.converged == 0 {
            return 0.0;
        }
        self.improper_any as f64 / self.converged as f64
    }
}

/// Runs replications in index order until `s` convergent outcomes are collected.
pub struct ConditionRun {
    pub report: MetricsReport,
    pub outcomes: Vec<RepOutcome>,
}

/// Upper bound on replications drawn per requested convergent outcome.
const MAX_DRAWS_PER_REP: usize = 10;

pub fn run_condition<E: Estimator + ?Sized>(
    cond: &SimCondition,
    s: usize,
    estimator: &E,
    master_seed: u64,
    workers: usize,
) -> Result<MetricsReport> {
    run_condition_detailed(cond, s, estimator, master_seed, workers).map(|r| r.report)
}

pub fn run_condition_detailed<E: Estimator + ?Sized>(
    cond: &SimCondition,
    s: usize,
    estimator: &E,
    master_seed: u64,
    workers: usize,
) -> Result<ConditionRun> {
    if s < 1 {
        return Err(LgmError::TooFewReps { needed: 1, got: s });
    }
    cond.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| LgmError::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    let max_draws = s * MAX_DRAWS_PER_REP + 100;
    let mut kept: Vec<RepOutcome> = Vec::with_capacity(s);
    let mut next = 0usize;
    let mut attempted = 0usize;
    while kept.len() < s && next < max_draws {
        let batch = (s - kept.len()).max(workers).min(max_draws - next);
        let indices: Vec<u64> = (next as u64..(next + batch) as u64).collect();
        let results: Vec<Result<RepOutcome>> = pool.install(|| {
            indices
                .par_iter()
                .map(|&i| {
                    run_replication(cond, replication_seed(master_seed, i), estimator).map(|mut o| {
                        o.index = i;
                        o
                    })
                })
                .collect()
        });
        next += batch;
        for r in results {
            let outcome = r?;
            if kept.len() == s {
                break;
            }
            attempted += 1;
            if outcome.converged {
                kept.push(outcome);
            }
        }
    }
    let truth = crate::simgen::condition_to_params(cond)?;
    let report = summarize_outcomes(cond, master_seed, s, attempted, &kept, &truth);
    Ok(ConditionRun { report, outcomes: kept })
}

fn summarize_outcomes(
    cond: &SimCondition,
    master_seed: u64,
    s: usize,
    attempted: usize,
    kept: &[RepOutcome],
    truth: &OriginalParams,
) -> MetricsReport {
    let mut parameters = Vec::new();
    for (name, tv) in truth.named_values() {
        let mut est = Vec::new();
        let mut cis = Vec::new();
        for o in kept {
            if let Some(p) = o.estimates.iter().find(|p| p.name == name) {
                est.push(p.estimate);
                if let Some(ci) = p.ci {
                    cis.push(ci);
                }
            }
        }
        if est.is_empty() {
            continue;
        }
        let ese = metric_empirical_se(&est).ok();
        parameters.push(ParamMetrics {
            truth: tv,
            count: est.len(),
            mean_estimate: mean(&est),
            relative_bias: metric_relative_bias(&est, tv),
            empirical_se: ese,
            relative_rmse: metric_relative_rmse(&est, tv),
            coverage: metric_coverage(&cis, tv).ok(),
            mc_se_bias: ese.map(|sd| mc_se_bias(sd * sd, est.len())),
            name,
        });
    }
    MetricsReport {
        condition: cond.clone(),
        master_seed,
        requested: s,
        replications_attempted: attempted,
        converged: kept.len(),
        used_reduced: kept.iter().filter(|o| o.used_reduced).count(),
        improper_negative_variance: kept
            .iter()
            .filter(|o| o.improper.iter().any(ImproperFlag::is_negative_variance))
            .count(),
        improper_out_of_range: kept
            .iter()
            .filter(|o| o.improper.iter().any(|f| !f.is_negative_variance()))
            .count(),
        improper_any: kept.iter().filter(|o| !o.improper.is_empty()).count(),
        parameters,
    }
}

/// Median and range of a statistic across conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Spread {
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let m = v.len();
        let median = if m % 2 == 1 {
            v[m / 2]
        } else {
            0.5 * (v[m / 2 - 1] + v[m / 2])
        };
        Some(Self {
            median,
            min: v[0],
            max: v[m - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ParamSummary {
    pub name: String,
    pub conditions: usize,
    pub relative_bias: Spread,
    pub empirical_se: Option<Spread>,
    pub relative_rmse: Spread,
    pub coverage: Option<Spread>,
    pub mc_se_bias: Option<Spread>,
}

/// Per-parameter median and range of each metric across conditions.
pub fn summarize_grid(reports: &[MetricsReport]) -> Result<Vec<ParamSummary>> {
    if reports.is_empty() {
        return Err(LgmError::InvalidArgument("at least one report is required".into()));
    }
    let mut names: Vec<String> = Vec::new();
    for r in reports {
        for p in &r.parameters {
            if !names.contains(&p.name) {
                names.push(p.name.clone());
            }
        }
    }
    let mut out = Vec::new();
    for name in names {
        let ps: Vec<&ParamMetrics> = reports.iter().filter_map(|r| r.parameter(&name)).collect();
        let collect = |f: &dyn Fn(&ParamMetrics) -> Option<f64>| ps.iter().filter_map(|p| f(p)).collect::<Vec<_>>();
        let rb = collect(&|p| Some(p.relative_bias.value));
        let rm = collect(&|p| Some(p.relative_rmse.value));
        out.push(ParamSummary {
            conditions: ps.len(),
            relative_bias: Spread::of(&rb).expect("non-empty"),
            empirical_se: Spread::of(&collect(&|p| p.empirical_se)),
            relative_rmse: Spread::of(&rm).expect("non-empty"),
            coverage: Spread::of(&collect(&|p| p.coverage)),
            mc_se_bias: Spread::of(&collect(&|p| p.mc_se_bias)),
            name,
        });
    }
    Ok(out)
}
