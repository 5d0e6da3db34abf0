//! Standard errors, Wald intervals, improper-solution checks and information criteria.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{LgmError, Result};
use crate::estimation::likelihood::FimlObjective;

/// A flagged defect of the interpretable factor covariance matrix.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ImproperFlag {
    NegativeVariance(String),
    OutOfRangeCorrelation(String, String),
}

impl ImproperFlag {
    pub fn is_negative_variance(&self) -> bool {
        matches!(self, ImproperFlag::NegativeVariance(_))
    }
}

impl std::fmt::Display for ImproperFlag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ImproperFlag::NegativeVariance(a) => write!(f, "negativeVariance({a})"),
            ImproperFlag::OutOfRangeCorrelation(a, b) => write!(f, "outOfRangeCorrelation({a}, {b})"),
        }
    }
}

/// `estimate ± z·se` with `z` the `(1 + level)/2` standard normal quantile.
pub fn wald_ci(estimate: f64, se: f64, level: f64) -> (f64, f64) {
    let z = Normal::standard().inverse_cdf(0.5 * (1.0 + level));
    (estimate - z * se, estimate + z * se)
}

/// `(aic, bic)` for a model with `p` free parameters fitted to `n` individuals.
pub fn information_criteria(loglik: f64, p: usize, n: usize) -> Result<(f64, f64)> {
    if p == 0 {
        return Err(LgmError::InvalidArgument("parameter count must be at least 1".into()));
    }
    if n == 0 {
        return Err(LgmError::InvalidArgument("sample size must be at least 1".into()));
    }
    let dev = -2.0 * loglik;
    Ok((dev + 2.0 * p as f64, dev + p as f64 * (n as f64).ln()))
}

/// Flags negative variances and correlations outside `[-1, 1]` in `cov`.
///
/// Pairs involving a non-positive variance are left to the variance flag.
pub fn diagnose_covariance(cov: &DMatrix<f64>, names: &[&str]) -> BTreeSet<ImproperFlag> {
    let mut flags = BTreeSet::new();
    let k = cov.nrows();
    for a in 0..k {
        if cov[(a, a)] < 0.0 {
            flags.insert(ImproperFlag::NegativeVariance(names[a].to_string()));
        }
    }
    for a in 0..k {
        for b in (a + 1)..k {
            let (va, vb) = (cov[(a, a)], cov[(b, b)]);
            if va <= 0.0 || vb <= 0.0 {
                continue;
            }
            let r = cov[(a, b)] / (va * vb).sqrt();
            if r.abs() > 1.0 {
                flags.insert(ImproperFlag::OutOfRangeCorrelation(
                    names[a].to_string(),
                    names[b].to_string(),
                ));
            }
        }
    }
    flags
}

pub(crate) fn step_size(v: f64) -> f64 {
    (1e-4 * v.abs()).max(1e-4)
}

/// Central-difference Hessian of `−loglik` built from the analytic gradient.
pub(crate) fn negative_hessian(objective: &FimlObjective, free: &[f64]) -> Result<DMatrix<f64>> {
    let n = free.len();
    let mut hess = DMatrix::zeros(n, n);
    let mut x = free.to_vec();
    for j in 0..n {
        let h = step_size(free[j]);
        x[j] = free[j] + h;
        let (_, gp) = objective.loglik_and_gradient(&x)?;
        x[j] = free[j] - h;
        let (_, gm) = objective.loglik_and_gradient(&x)?;
        x[j] = free[j];
        for i in 0..n {
            hess[(i, j)] = -(gp[i] - gm[i]) / (2.0 * h);
        }
    }
    Ok((&hess + hess.transpose()) * 0.5)
}

/// Inverse of a symmetric positive definite information matrix.
pub(crate) fn invert_information(info: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if info.iter().any(|v| !v.is_finite()) {
        return Err(LgmError::SingularInformation);
    }
    let eig = SymmetricEigen::new(info.clone());
    let max = eig.eigenvalues.amax();
    let min = eig.eigenvalues.min();
    if max <= 0.0 || min <= 1e-10 * max {
        return Err(LgmError::SingularInformation);
    }
    let inv_vals = eig.eigenvalues.map(|l| 1.0 / l);
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&inv_vals) * eig.eigenvectors.transpose())
}

/// Finite-difference Jacobian of `map` at `free`, same steps as the Hessian.
pub(crate) fn jacobian<F>(free: &[f64], map: F) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let base = map(free);
    let mut jac = DMatrix::zeros(base.len(), free.len());
    let mut x = free.to_vec();
    for j in 0..free.len() {
        let h = step_size(free[j]);
        x[j] = free[j] + h;
        let up = map(&x);
        x[j] = free[j] - h;
        let down = map(&x);
        x[j] = free[j];
        for i in 0..base.len() {
            jac[(i, j)] = (up[i] - down[i]) / (2.0 * h);
        }
    }
    jac
}

/// Delta-method standard errors of `map(free)` given the free-vector covariance.
pub(crate) fn delta_method<F>(free: &[f64], cov: &DMatrix<f64>, map: F) -> Vec<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let jac = jacobian(free, map);
    let v = &jac * cov * jac.transpose();
    (0..v.nrows()).map(|i| v[(i, i)].max(0.0).sqrt()).collect()
}
