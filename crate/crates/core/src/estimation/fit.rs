//! Model fitting with the retry protocol.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{LgmError, Result};
use crate::estimation::inference::{
    delta_method, diagnose_covariance, information_criteria, invert_information, negative_hessian, wald_ci,
    ImproperFlag,
};
use crate::estimation::init::{initial_values, jitter};
use crate::estimation::layout::{FittedParams, ModelKind, OriginalSpace};
use crate::estimation::likelihood::FimlObjective;
use crate::estimation::optimize::{minimize, BfgsOutcome, BfgsSettings};
use crate::model::{LikelihoodMode, LongitudinalDataset};

/// Estimation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct FitOptions {
    pub mode: LikelihoodMode,
    pub max_attempts: usize,
    pub grad_tol: f64,
    pub rel_f_tol: f64,
    pub max_iter: usize,
    pub ci_level: f64,
    /// Seed of the retry jitter streams.
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            mode: LikelihoodMode::Marginal,
            max_attempts: 10,
            grad_tol: 1e-6,
            rel_f_tol: 1e-10,
            max_iter: 2000,
            ci_level: 0.95,
            seed: 0,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_attempts < 1 {
            return Err(LgmError::InvalidArgument("maxAttempts must be at least 1".into()));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(LgmError::InvalidArgument("ciLevel must lie in (0, 1)".into()));
        }
        if self.grad_tol.is_nan() || self.grad_tol < 0.0 || self.rel_f_tol.is_nan() || self.rel_f_tol < 0.0 {
            return Err(LgmError::InvalidArgument("tolerances must be non-negative".into()));
        }
        Ok(())
    }
}

/// One reported parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamEstimate {
    pub name: String,
    pub estimate: f64,
    pub se: Option<f64>,
    pub ci: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: ModelKind,
    pub mode: LikelihoodMode,
    /// Estimates in the space the likelihood was maximized over (centered covariates).
    pub reparam: FittedParams,
    pub original: OriginalSpace,
    pub reparam_estimates: Vec<ParamEstimate>,
    pub original_estimates: Vec<ParamEstimate>,
    /// Optimizer coordinates at the returned point.
    pub free: Vec<f64>,
    /// Sample covariate means subtracted before fitting.
    pub covariate_means: DVector<f64>,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub n_params: usize,
    pub n_obs: usize,
    pub residual_var: f64,
    pub converged: bool,
    pub attempts: usize,
    pub iterations: usize,
    pub grad_max_norm: f64,
    pub ci_level: f64,
    pub improper: BTreeSet<ImproperFlag>,
    pub information_singular: bool,
}

impl FitResult {
    pub fn original_estimate(&self, name: &str) -> Option<&ParamEstimate> {
        self.original_estimates.iter().find(|p| p.name == name)
    }

    pub fn reparam_estimate(&self, name: &str) -> Option<&ParamEstimate> {
        self.reparam_estimates.iter().find(|p| p.name == name)
    }

    pub fn is_improper(&self) -> bool {
        !self.improper.is_empty()
    }

    pub fn has_standard_errors(&self) -> bool {
        self.original_estimates.iter().all(|p| p.se.is_some())
    }
}

/// Fit the random-knot piecewise model.
pub fn fit_full(dataset: &LongitudinalDataset, options: &FitOptions) -> Result<FitResult> {
    fit_model(ModelKind::Full, dataset, options)
}

/// Fit the fixed-knot piecewise model.
pub fn fit_reduced(dataset: &LongitudinalDataset, options: &FitOptions) -> Result<FitResult> {
    fit_model(ModelKind::Reduced, dataset, options)
}

/// Fit a linear or quadratic latent growth model.
pub fn fit_baseline(dataset: &LongitudinalDataset, form: ModelKind, options: &FitOptions) -> Result<FitResult> {
    match form {
        ModelKind::Linear | ModelKind::Quadratic => fit_model(form, dataset, options),
        other => Err(LgmError::InvalidArgument(format!("{other:?} is not a baseline form"))),
    }
}

/// Fit `kind` from data-driven starting values.
pub fn fit_model(kind: ModelKind, dataset: &LongitudinalDataset, options: &FitOptions) -> Result<FitResult> {
    check_identified(kind, dataset)?;
    let start = initial_values(dataset, kind)?;
    fit_model_from(kind, dataset, options, &start)
}

fn check_identified(kind: ModelKind, dataset: &LongitudinalDataset) -> Result<()> {
    if dataset.waves() < kind.min_waves() {
        return Err(LgmError::Identification(format!(
            "{} needs at least {} waves, got {}",
            kind.label(),
            kind.min_waves(),
            dataset.waves()
        )));
    }
    Ok(())
}

/// Fit `kind` starting from `start` (given in the centered-covariate frame).
///
/// Attempt 1 starts at `start`; later attempts jitter it. The first
/// convergent attempt is returned. When none converges the attempt with the
/// highest likelihood is returned with `converged = false`.
pub fn fit_model_from(
    kind: ModelKind,
    dataset: &LongitudinalDataset,
    options: &FitOptions,
    start: &FittedParams,
) -> Result<FitResult> {
    options.validate()?;
    check_identified(kind, dataset)?;
    let objective = FimlObjective::new(kind, dataset, options.mode)?;
    let x0 = objective.pack(start);
    if x0.len() != objective.n_free() {
        return Err(LgmError::Dimension(format!(
            "starting values have {} free entries, the model needs {}",
            x0.len(),
            objective.n_free()
        )));
    }
    let mut best: Option<BfgsOutcome> = None;
    for attempt in 1..=options.max_attempts {
        let s = if attempt == 1 {
            x0.clone()
        } else {
            jitter(&x0, options.seed, attempt as u64)
        };
        let out = optimize(&objective, &s, options);
        if out.converged() {
            return assemble(&objective, &out, attempt, true, options);
        }
        if out.f.is_finite() && best.as_ref().is_none_or(|b| out.f < b.f) {
            best = Some(out);
        }
    }
    match best {
        Some(out) => assemble(&objective, &out, options.max_attempts, false, options),
        None => Err(LgmError::NumericFailure(
            "no attempt reached a point with positive definite implied covariances".into(),
        )),
    }
}

/// BFGS on `−loglik`, seeded with the inverse observed information at the
/// start when it is positive definite.
fn optimize(objective: &FimlObjective, start: &[f64], options: &FitOptions) -> BfgsOutcome {
    let settings = BfgsSettings {
        grad_tol: options.grad_tol,
        rel_f_tol: options.rel_f_tol,
        max_iter: options.max_iter,
    };
    let h0 = negative_hessian(objective, start)
        .ok()
        .and_then(|h| invert_information(&h).ok());
    minimize(
        |x: &[f64]| {
            objective
                .loglik_and_gradient(x)
                .ok()
                .filter(|(l, g)| l.is_finite() && g.iter().all(|v| v.is_finite()))
                .map(|(l, g)| (-l, g.into_iter().map(|v| -v).collect()))
        },
        start,
        h0,
        &settings,
    )
}

fn n_params(objective: &FimlObjective) -> usize {
    let c = objective.covariates();
    let extra = match objective.mode() {
        LikelihoodMode::Marginal => c + c * (c + 1) / 2,
        LikelihoodMode::Conditional => 0,
    };
    objective.n_free() + extra
}

fn bare_estimates(values: Vec<(String, f64)>) -> Vec<ParamEstimate> {
    values
        .into_iter()
        .map(|(name, estimate)| ParamEstimate {
            name,
            estimate,
            se: None,
            ci: None,
        })
        .collect()
}

fn assemble(
    objective: &FimlObjective,
    out: &BfgsOutcome,
    attempts: usize,
    converged: bool,
    options: &FitOptions,
) -> Result<FitResult> {
    let kind = objective.kind();
    let reparam = objective.to_params(&out.x);
    let original = reparam.to_original();
    let loglik = -out.f;
    let p = n_params(objective);
    let (aic, bic) = information_criteria(loglik, p, objective.n())?;
    let improper = diagnose_covariance(&original.factor_cov(), kind.factor_names());
    let mut result = FitResult {
        model: kind,
        mode: objective.mode(),
        reparam_estimates: bare_estimates(reparam.named_values()),
        original_estimates: bare_estimates(original.named_values()),
        residual_var: reparam.residual_var(),
        reparam,
        original,
        free: out.x.clone(),
        covariate_means: objective.covariate_means().clone(),
        loglik,
        aic,
        bic,
        n_params: p,
        n_obs: objective.n(),
        converged,
        attempts,
        iterations: out.iterations,
        grad_max_norm: out.grad_max_norm(),
        ci_level: options.ci_level,
        improper,
        information_singular: false,
    };
    if converged {
        if let Err(e) = attach_standard_errors(objective, &mut result) {
            match e {
                LgmError::SingularInformation | LgmError::NonPdCovariance { .. } => {
                    result.information_singular = true;
                }
                other => return Err(other),
            }
        }
    }
    Ok(result)
}

fn attach_standard_errors(objective: &FimlObjective, fit: &mut FitResult) -> Result<()> {
    let info = negative_hessian(objective, &fit.free)?;
    let mut cov = invert_information(&info)?;
    let nf = fit.free.len();
    let c = objective.covariates();
    let mut point = fit.free.clone();
    // In marginal mode the covariate mean is estimated too; its sampling
    // variance enters the factor means through the paths.
    if objective.mode() == LikelihoodMode::Marginal && c > 0 {
        let mut ext = DMatrix::zeros(nf + c, nf + c);
        ext.view_mut((0, 0), (nf, nf)).copy_from(&cov);
        let phi_n = objective.covariate_cov() / objective.n() as f64;
        ext.view_mut((nf, nf), (c, c)).copy_from(&phi_n);
        cov = ext;
        point.extend(std::iter::repeat_n(0.0, c));
    }
    let params_at = |v: &[f64]| {
        let p = objective.to_params(&v[..nf]);
        if v.len() > nf {
            p.shift_covariate_mean(&DVector::from_column_slice(&v[nf..]))
        } else {
            p
        }
    };
    let values = |params: Vec<(String, f64)>| params.into_iter().map(|(_, v)| v).collect::<Vec<_>>();
    let se_reparam = delta_method(&point, &cov, |v| values(params_at(v).named_values()));
    let se_original = delta_method(&point, &cov, |v| values(params_at(v).to_original().named_values()));
    let level = fit.ci_level;
    for (est, se) in fit.reparam_estimates.iter_mut().zip(se_reparam) {
        est.se = Some(se);
        est.ci = Some(wald_ci(est.estimate, se, level));
    }
    for (est, se) in fit.original_estimates.iter_mut().zip(se_original) {
        est.se = Some(se);
        est.ci = Some(wald_ci(est.estimate, se, level));
    }
    fit.information_singular = false;
    Ok(())
}

/// Recompute observed-information standard errors and Wald intervals for `fit`.
pub fn standard_errors(fit: &FitResult, dataset: &LongitudinalDataset) -> Result<FitResult> {
    if !fit.converged {
        return Err(LgmError::InvalidArgument(
            "standard errors require a converged fit".into(),
        ));
    }
    let objective = FimlObjective::new(fit.model, dataset, fit.mode)?;
    if objective.n_free() != fit.free.len() {
        return Err(LgmError::Dimension(
            "fit does not match the dataset's covariate count".into(),
        ));
    }
    let mut out = fit.clone();
    for est in out
        .reparam_estimates
        .iter_mut()
        .chain(out.original_estimates.iter_mut())
    {
        est.se = None;
        est.ci = None;
    }
    attach_standard_errors(&objective, &mut out)?;
    Ok(out)
}

/// Flags for the interpretable factor covariance of `fit`.
pub fn diagnose_improper(fit: &FitResult) -> BTreeSet<ImproperFlag> {
    diagnose_covariance(&fit.original.factor_cov(), fit.model.factor_names())
}

/// Covariance of the free vector at the fit, from the observed information.
pub fn free_covariance(fit: &FitResult, dataset: &LongitudinalDataset) -> Result<DMatrix<f64>> {
    let objective = FimlObjective::new(fit.model, dataset, fit.mode)?;
    invert_information(&negative_hessian(&objective, &fit.free)?)
}
