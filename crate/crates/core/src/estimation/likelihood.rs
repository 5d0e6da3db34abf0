//! Gaussian full-information likelihood.
//!
//! In marginal mode the covariates are modelled jointly with the outcomes:
//! the outcome margin has the moments of [`crate::model::model_moments`] in
//! marginal mode, the covariate margin is `N(μx, Φ)` and the cross-covariance
//! is `ΛBΦ`. The joint density factors into the conditional outcome density
//! times the covariate density, which is how it is evaluated here. Without
//! covariates both modes coincide.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{LgmError, Result};
use crate::estimation::layout::{pack, params_to_point, point_to_params, unpack, FittedParams, ModelKind, Point};
use crate::model::{model_moments, sign0, GrowthModel, LikelihoodMode, LongitudinalDataset};

/// Log density of `N(mu, sigma)` at `y`; `None` when `sigma` is not positive definite.
pub fn mvn_log_density(y: &DVector<f64>, mu: &DVector<f64>, sigma: &DMatrix<f64>) -> Option<f64> {
    let dim = y.len();
    if dim == 0 {
        return Some(0.0);
    }
    let chol = Cholesky::new(sigma.clone())?;
    let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let r = y - mu;
    let z = chol.solve(&r);
    Some(-0.5 * dim as f64 * (2.0 * PI).ln() - 0.5 * log_det - 0.5 * r.dot(&z))
}

/// Log-likelihood contribution of one individual.
///
/// The normalizing constant is `−(J/2)·ln 2π` (plus `−(c/2)·ln 2π` for the
/// covariate margin in marginal mode).
pub fn loglik_individual<M: GrowthModel + ?Sized>(
    params: &M,
    y: &[f64],
    t: &[f64],
    x: &[f64],
    mode: LikelihoodMode,
) -> Result<f64> {
    if y.len() != t.len() {
        return Err(LgmError::Dimension("outcome and time rows differ in length".into()));
    }
    let (mu, sigma) = model_moments(params, t, LikelihoodMode::Conditional, Some(x))?;
    let mut ll =
        mvn_log_density(&DVector::from_column_slice(y), &mu, &sigma).ok_or(LgmError::NonPdCovariance { index: 0 })?;
    if mode == LikelihoodMode::Marginal && !x.is_empty() {
        ll += mvn_log_density(
            &DVector::from_column_slice(x),
            params.covariate_mean(),
            params.covariate_cov(),
        )
        .ok_or(LgmError::NonPdCovariates)?;
    }
    Ok(ll)
}

/// Sum of individual contributions over the sample.
pub fn loglik_total<M: GrowthModel + ?Sized>(
    params: &M,
    dataset: &LongitudinalDataset,
    mode: LikelihoodMode,
) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..dataset.n() {
        total +=
            loglik_individual(params, &dataset.y_row(i), &dataset.t_row(i), &dataset.x_row(i), mode).map_err(|e| {
                match e {
                    LgmError::NonPdCovariance { .. } => LgmError::NonPdCovariance { index: i },
                    other => other,
                }
            })?;
    }
    Ok(total)
}

/// The likelihood as a function of a model's free-parameter vector.
///
/// Covariates are centered on construction; their sample means and
/// maximum-likelihood covariance are held fixed.
#[derive(Debug, Clone)]
pub struct FimlObjective {
    kind: ModelKind,
    mode: LikelihoodMode,
    ys: Vec<DVector<f64>>,
    ts: Vec<Vec<f64>>,
    xs: Vec<DVector<f64>>,
    waves: usize,
    covariates: usize,
    covariate_means: DVector<f64>,
    covariate_cov: DMatrix<f64>,
    covariate_loglik: f64,
}

impl FimlObjective {
    pub fn new(kind: ModelKind, dataset: &LongitudinalDataset, mode: LikelihoodMode) -> Result<Self> {
        let (centered, means) = dataset.centered();
        let phi = centered.covariate_cov();
        let c = dataset.covariates();
        let mut covariate_loglik = 0.0;
        if mode == LikelihoodMode::Marginal && c > 0 {
            let zero = DVector::zeros(c);
            for i in 0..centered.n() {
                let x = DVector::from_vec(centered.x_row(i));
                covariate_loglik += mvn_log_density(&x, &zero, &phi).ok_or(LgmError::NonPdCovariates)?;
            }
        }
        Ok(Self {
            kind,
            mode,
            ys: (0..centered.n())
                .map(|i| DVector::from_vec(centered.y_row(i)))
                .collect(),
            ts: (0..centered.n()).map(|i| centered.t_row(i)).collect(),
            xs: (0..centered.n())
                .map(|i| DVector::from_vec(centered.x_row(i)))
                .collect(),
            waves: dataset.waves(),
            covariates: c,
            covariate_means: means,
            covariate_cov: phi,
            covariate_loglik,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn mode(&self) -> LikelihoodMode {
        self.mode
    }

    pub fn n(&self) -> usize {
        self.ys.len()
    }

    pub fn covariates(&self) -> usize {
        self.covariates
    }

    pub fn n_free(&self) -> usize {
        self.kind.n_free(self.covariates)
    }

    /// Raw covariate means removed before fitting.
    pub fn covariate_means(&self) -> &DVector<f64> {
        &self.covariate_means
    }

    pub fn covariate_cov(&self) -> &DMatrix<f64> {
        &self.covariate_cov
    }

    /// Typed parameters (centered-covariate frame, so `mu_x = 0`).
    pub fn to_params(&self, free: &[f64]) -> FittedParams {
        let point = unpack(self.kind, self.covariates, free);
        point_to_params(self.kind, &point, &DVector::zeros(self.covariates), &self.covariate_cov)
    }

    pub fn pack(&self, params: &FittedParams) -> Vec<f64> {
        pack(self.kind, &params_to_point(params))
    }

    pub(crate) fn point(&self, free: &[f64]) -> Point {
        unpack(self.kind, self.covariates, free)
    }

    pub fn loglik(&self, free: &[f64]) -> Result<f64> {
        self.evaluate(free, false).map(|(v, _)| v)
    }

    /// Log-likelihood and its analytic gradient with respect to the free vector.
    pub fn loglik_and_gradient(&self, free: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.evaluate(free, true).map(|(v, g)| (v, g.unwrap_or_default()))
    }

    fn loadings(&self, t_row: &[f64], point: &Point) -> DMatrix<f64> {
        let k = self.kind.n_factors();
        let knot = point.knot;
        let half_diff = point.intercepts[2.min(k - 1)];
        DMatrix::from_fn(t_row.len(), k, |j, col| {
            let t = t_row[j];
            match self.kind {
                ModelKind::Full | ModelKind::Reduced => {
                    let d = t - knot;
                    match col {
                        0 => 1.0,
                        1 => d,
                        2 => d.abs(),
                        _ => -half_diff - half_diff * sign0(d),
                    }
                }
                ModelKind::Linear | ModelKind::Quadratic => t.powi(col as i32),
            }
        })
    }

    fn evaluate(&self, free: &[f64], want_grad: bool) -> Result<(f64, Option<Vec<f64>>)> {
        if free.len() != self.n_free() {
            return Err(LgmError::Dimension(format!(
                "expected {} free parameters, got {}",
                self.n_free(),
                free.len()
            )));
        }
        let point = self.point(free);
        let k = self.kind.n_factors();
        let c = self.covariates;
        let j_waves = self.waves;
        let constant = -0.5 * j_waves as f64 * (2.0 * PI).ln();

        let mut total = self.covariate_loglik;
        let mut g_intercepts = DVector::<f64>::zeros(k);
        let mut g_paths = DMatrix::<f64>::zeros(k, c);
        let mut g_psi = DMatrix::<f64>::zeros(k, k);
        let mut g_theta = 0.0;
        let mut g_knot = 0.0;
        let mut g_half_diff = 0.0;

        for (i, ((y, t), x)) in self.ys.iter().zip(&self.ts).zip(&self.xs).enumerate() {
            let lambda = self.loadings(t, &point);
            let m = &point.intercepts + &point.paths * x;
            let r = y - &lambda * &m;
            let lp = &lambda * &point.psi;
            let mut sigma = &lp * lambda.transpose();
            for d in 0..j_waves {
                sigma[(d, d)] += point.theta;
            }
            let chol: Cholesky<f64, Dyn> = Cholesky::new(sigma).ok_or(LgmError::NonPdCovariance { index: i })?;
            let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
            let a = chol.solve(&r);
            total += constant - 0.5 * log_det - 0.5 * r.dot(&a);

            if want_grad {
                let sigma_inv = chol.inverse();
                let w = &a * a.transpose() - sigma_inv;
                let gm = lambda.transpose() * &a;
                g_intercepts += &gm;
                g_paths += &gm * x.transpose();
                g_psi += 0.5 * lambda.transpose() * &w * &lambda;
                g_theta += 0.5 * w.trace();
                if self.kind.has_knot() {
                    // dL/dΛ = a mᵀ + W Λ Ψ
                    let g_lambda = &a * m.transpose() + &w * &lp;
                    for (row, &tj) in t.iter().enumerate() {
                        let s = sign0(tj - point.knot);
                        g_knot += -g_lambda[(row, 1)] - s * g_lambda[(row, 2)];
                        if self.kind == ModelKind::Full {
                            g_half_diff += -(1.0 + s) * g_lambda[(row, 3)];
                        }
                    }
                }
            }
        }

        if !want_grad {
            return Ok((total, None));
        }
        if self.kind == ModelKind::Full {
            g_intercepts[2] += g_half_diff;
        }
        let mut grad = Vec::with_capacity(self.n_free());
        grad.extend(g_intercepts.iter().take(self.kind.n_intercepts()));
        if self.kind.has_knot() {
            grad.push(g_knot);
        }
        for a in 0..k {
            for b in a..k {
                grad.push(if a == b {
                    g_psi[(a, a)]
                } else {
                    g_psi[(a, b)] + g_psi[(b, a)]
                });
            }
        }
        for a in 0..k {
            for x in 0..c {
                grad.push(g_paths[(a, x)]);
            }
        }
        grad.push(g_theta * point.theta);
        Ok((total, Some(grad)))
    }
}
