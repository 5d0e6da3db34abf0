//! Domain types, factor loadings and model-implied moments.
//!
//! The full model carries four reparameterized growth factors (the
//! measurement at the knot, the mean of the two slopes, the half-difference
//! of the slopes and the knot deviation) whose loadings depend on the knot
//! mean and on the mean half-difference. The reduced model fixes the knot
//! and drops the fourth factor.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{LgmError, Result};

/// How covariates enter the likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LikelihoodMode {
    /// Covariates are modelled jointly with the outcomes; the outcome margin
    /// has mean `Λ(α + Bμx)` and covariance `ΛΨΛᵀ + ΛBΦBᵀΛᵀ + θI`.
    #[default]
    Marginal,
    /// Covariates are fixed regressors: mean `Λ(α + Bx)`, covariance `ΛΨΛᵀ + θI`.
    Conditional,
}

/// Individual growth factors in the original (interpretable) space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthFactors {
    pub eta0: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub gamma: f64,
}

/// Individual growth factors in the reparameterized space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReparamFactors {
    /// Measurement at the knot.
    pub eta0p: f64,
    /// Mean of the two slopes.
    pub eta1p: f64,
    /// Half-difference of the slopes.
    pub eta2p: f64,
    /// Deviation of the individual knot from the knot mean.
    pub delta: f64,
}

impl GrowthFactors {
    /// Reparameterized factors relative to `knot_mean`.
    pub fn to_reparam(&self, knot_mean: f64) -> ReparamFactors {
        ReparamFactors {
            eta0p: self.eta0 + self.gamma * self.eta1,
            eta1p: 0.5 * (self.eta1 + self.eta2),
            eta2p: 0.5 * (self.eta2 - self.eta1),
            delta: self.gamma - knot_mean,
        }
    }
}

impl ReparamFactors {
    pub fn to_original(&self, knot_mean: f64) -> GrowthFactors {
        let gamma = self.delta + knot_mean;
        let eta1 = self.eta1p - self.eta2p;
        GrowthFactors {
            eta0: self.eta0p - gamma * eta1,
            eta1,
            eta2: self.eta1p + self.eta2p,
            gamma,
        }
    }
}

/// Interpretable parameters of the full model.
#[derive(Debug, Clone, PartialEq)]
pub struct OriginalParams {
    /// (μη0, μη1, μη2, μγ)
    pub alpha: Vector4<f64>,
    /// Unexplained growth-factor covariance.
    pub psi: Matrix4<f64>,
    /// Paths from covariates to growth factors, 4 × c.
    pub b: DMatrix<f64>,
    pub mu_x: DVector<f64>,
    pub phi: DMatrix<f64>,
    pub theta_eps: f64,
}

/// Estimable parameters of the full model.
///
/// `alpha_prime[3]` holds the knot mean μγ, shared verbatim with the
/// original space. The intercept of the knot-deviation factor is zero by
/// construction and is not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct ReparamParams {
    pub alpha_prime: Vector4<f64>,
    pub psi_prime: Matrix4<f64>,
    pub b_prime: DMatrix<f64>,
    pub mu_x: DVector<f64>,
    pub phi: DMatrix<f64>,
    pub theta_eps: f64,
}

/// Estimable parameters of the fixed-knot model.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedParams {
    pub alpha_prime: Vector3<f64>,
    pub gamma: f64,
    pub psi_prime: Matrix3<f64>,
    pub b_prime: DMatrix<f64>,
    pub mu_x: DVector<f64>,
    pub phi: DMatrix<f64>,
    pub theta_eps: f64,
}

/// Interpretable parameters of the fixed-knot model.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedOriginal {
    /// (μη0, μη1, μη2)
    pub alpha: Vector3<f64>,
    pub gamma: f64,
    pub psi: Matrix3<f64>,
    pub b: DMatrix<f64>,
    pub mu_x: DVector<f64>,
    pub phi: DMatrix<f64>,
    pub theta_eps: f64,
}

/// Polynomial latent growth model with loadings (1, t) or (1, t, t²).
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialParams {
    pub degree: usize,
    pub alpha: DVector<f64>,
    pub psi: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub mu_x: DVector<f64>,
    pub phi: DMatrix<f64>,
    pub theta_eps: f64,
}

/// Common view over every latent growth structure used for moments.
pub trait GrowthModel {
    fn loadings(&self, t_row: &[f64]) -> DMatrix<f64>;
    /// Factor intercepts entering `Λ(α + Bx)`.
    fn factor_intercepts(&self) -> DVector<f64>;
    fn factor_cov(&self) -> DMatrix<f64>;
    fn paths(&self) -> &DMatrix<f64>;
    fn covariate_mean(&self) -> &DVector<f64>;
    fn covariate_cov(&self) -> &DMatrix<f64>;
    fn residual_var(&self) -> f64;
}

impl GrowthModel for ReparamParams {
    fn loadings(&self, t_row: &[f64]) -> DMatrix<f64> {
        build_loadings_full(t_row, self.alpha_prime[3], self.alpha_prime[2])
    }
    fn factor_intercepts(&self) -> DVector<f64> {
        DVector::from_vec(vec![self.alpha_prime[0], self.alpha_prime[1], self.alpha_prime[2], 0.0])
    }
    fn factor_cov(&self) -> DMatrix<f64> {
        DMatrix::from_iterator(4, 4, self.psi_prime.iter().copied())
    }
    fn paths(&self) -> &DMatrix<f64> {
        &self.b_prime
    }
    fn covariate_mean(&self) -> &DVector<f64> {
        &self.mu_x
    }
    fn covariate_cov(&self) -> &DMatrix<f64> {
        &self.phi
    }
    fn residual_var(&self) -> f64 {
        self.theta_eps
    }
}

impl GrowthModel for ReducedParams {
    fn loadings(&self, t_row: &[f64]) -> DMatrix<f64> {
        build_loadings_reduced(t_row, self.gamma)
    }
    fn factor_intercepts(&self) -> DVector<f64> {
        DVector::from_iterator(3, self.alpha_prime.iter().copied())
    }
    fn factor_cov(&self) -> DMatrix<f64> {
        DMatrix::from_iterator(3, 3, self.psi_prime.iter().copied())
    }
    fn paths(&self) -> &DMatrix<f64> {
        &self.b_prime
    }
    fn covariate_mean(&self) -> &DVector<f64> {
        &self.mu_x
    }
    fn covariate_cov(&self) -> &DMatrix<f64> {
        &self.phi
    }
    fn residual_var(&self) -> f64 {
        self.theta_eps
    }
}

impl GrowthModel for PolynomialParams {
    fn loadings(&self, t_row: &[f64]) -> DMatrix<f64> {
        build_loadings_polynomial(t_row, self.degree)
    }
    fn factor_intercepts(&self) -> DVector<f64> {
        self.alpha.clone()
    }
    fn factor_cov(&self) -> DMatrix<f64> {
        self.psi.clone()
    }
    fn paths(&self) -> &DMatrix<f64> {
        &self.b
    }
    fn covariate_mean(&self) -> &DVector<f64> {
        &self.mu_x
    }
    fn covariate_cov(&self) -> &DMatrix<f64> {
        &self.phi
    }
    fn residual_var(&self) -> f64 {
        self.theta_eps
    }
}

/// Sign with `sign(0) = 0`.
#[inline]
pub(crate) fn sign0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Loadings of the full model, one row `(1, t−μγ, |t−μγ|, −μ′η2(1 + sign(t−μγ)))`
/// per measurement occasion.
pub fn build_loadings_full(t_row: &[f64], knot_mean: f64, half_diff_mean: f64) -> DMatrix<f64> {
    DMatrix::from_fn(t_row.len(), 4, |j, k| {
        let d = t_row[j] - knot_mean;
        match k {
            0 => 1.0,
            1 => d,
            2 => d.abs(),
            _ => -half_diff_mean - half_diff_mean * sign0(d),
        }
    })
}

/// Loadings of the fixed-knot model, rows `(1, t−γ, |t−γ|)`.
pub fn build_loadings_reduced(t_row: &[f64], gamma: f64) -> DMatrix<f64> {
    DMatrix::from_fn(t_row.len(), 3, |j, k| {
        let d = t_row[j] - gamma;
        match k {
            0 => 1.0,
            1 => d,
            _ => d.abs(),
        }
    })
}

/// Polynomial loadings `(1, t, …, t^degree)`.
pub fn build_loadings_polynomial(t_row: &[f64], degree: usize) -> DMatrix<f64> {
    DMatrix::from_fn(t_row.len(), degree + 1, |j, k| t_row[j].powi(k as i32))
}

/// Mirror the upper triangle onto the lower one.
pub(crate) fn symmetrize_upper(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            m[(j, i)] = m[(i, j)];
        }
    }
}

/// Model-implied mean and covariance of one individual's outcomes.
pub fn model_moments<M: GrowthModel + ?Sized>(
    params: &M,
    t_row: &[f64],
    mode: LikelihoodMode,
    x: Option<&[f64]>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let lambda = params.loadings(t_row);
    let b = params.paths();
    let mut factor_cov = params.factor_cov();
    let eta_mean = match mode {
        LikelihoodMode::Marginal => {
            let mu_x = params.covariate_mean();
            if b.ncols() != mu_x.len() {
                return Err(LgmError::Dimension(format!(
                    "paths have {} columns but covariate mean has {} entries",
                    b.ncols(),
                    mu_x.len()
                )));
            }
            factor_cov += b * params.covariate_cov() * b.transpose();
            params.factor_intercepts() + b * mu_x
        }
        LikelihoodMode::Conditional => {
            let x = x.ok_or(LgmError::MissingCovariates)?;
            if x.len() != b.ncols() {
                return Err(LgmError::Dimension(format!(
                    "expected {} covariates, got {}",
                    b.ncols(),
                    x.len()
                )));
            }
            params.factor_intercepts() + b * DVector::from_column_slice(x)
        }
    };
    let mu = &lambda * eta_mean;
    let mut sigma = &lambda * factor_cov * lambda.transpose();
    for j in 0..t_row.len() {
        sigma[(j, j)] += params.residual_var();
    }
    symmetrize_upper(&mut sigma);
    Ok((mu, sigma))
}

/// Moments of the full model.
pub fn model_moments_full(
    params: &ReparamParams,
    t_row: &[f64],
    mode: LikelihoodMode,
    x: Option<&[f64]>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    model_moments(params, t_row, mode, x)
}

/// Moments of the fixed-knot model.
pub fn model_moments_reduced(
    params: &ReducedParams,
    t_row: &[f64],
    mode: LikelihoodMode,
    x: Option<&[f64]>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    model_moments(params, t_row, mode, x)
}

/// Evaluate the piecewise trajectory (no residual).
pub fn predict_trajectory(factors: &GrowthFactors, t_row: &[f64]) -> Vec<f64> {
    let GrowthFactors {
        eta0,
        eta1,
        eta2,
        gamma,
    } = *factors;
    t_row
        .iter()
        .map(|&t| {
            if t <= gamma {
                eta0 + eta1 * t
            } else {
                eta0 + eta1 * gamma + eta2 * (t - gamma)
            }
        })
        .collect()
}

/// Repeated outcomes, individual measurement occasions and time-invariant
/// covariates for `n` individuals observed at `J` waves.
#[derive(Debug, Clone, PartialEq)]
pub struct LongitudinalDataset {
    y: DMatrix<f64>,
    t: DMatrix<f64>,
    x: DMatrix<f64>,
}

impl LongitudinalDataset {
    pub fn new(y: DMatrix<f64>, t: DMatrix<f64>, x: DMatrix<f64>) -> Result<Self> {
        let (n, waves) = y.shape();
        if n == 0 {
            return Err(LgmError::InvalidData("dataset has no individuals".into()));
        }
        if waves == 0 {
            return Err(LgmError::InvalidData("dataset has no waves".into()));
        }
        if t.shape() != (n, waves) {
            return Err(LgmError::InvalidData(format!(
                "time matrix is {}x{}, outcomes are {}x{}",
                t.nrows(),
                t.ncols(),
                n,
                waves
            )));
        }
        if x.nrows() != n {
            return Err(LgmError::InvalidData(format!(
                "covariate matrix has {} rows, expected {}",
                x.nrows(),
                n
            )));
        }
        for i in 0..n {
            for j in 0..waves {
                if !y[(i, j)].is_finite() {
                    return Err(LgmError::InvalidData(format!(
                        "outcome at individual {i}, wave {} is not finite",
                        j + 1
                    )));
                }
                if !t[(i, j)].is_finite() {
                    return Err(LgmError::InvalidData(format!(
                        "time at individual {i}, wave {} is not finite",
                        j + 1
                    )));
                }
                if j > 0 && t[(i, j)] <= t[(i, j - 1)] {
                    return Err(LgmError::InvalidData(format!(
                        "times of individual {i} are not strictly increasing at wave {}",
                        j + 1
                    )));
                }
            }
            for k in 0..x.ncols() {
                if !x[(i, k)].is_finite() {
                    return Err(LgmError::InvalidData(format!(
                        "covariate {} of individual {i} is not finite",
                        k + 1
                    )));
                }
            }
        }
        Ok(Self { y, t, x })
    }

    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    pub fn waves(&self) -> usize {
        self.y.ncols()
    }

    pub fn covariates(&self) -> usize {
        self.x.ncols()
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn t(&self) -> &DMatrix<f64> {
        &self.t
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y_row(&self, i: usize) -> Vec<f64> {
        self.y.row(i).iter().copied().collect()
    }

    pub fn t_row(&self, i: usize) -> Vec<f64> {
        self.t.row(i).iter().copied().collect()
    }

    pub fn x_row(&self, i: usize) -> Vec<f64> {
        self.x.row(i).iter().copied().collect()
    }

    /// Sample means of the covariates.
    pub fn covariate_means(&self) -> DVector<f64> {
        let n = self.n() as f64;
        DVector::from_fn(self.covariates(), |k, _| self.x.column(k).sum() / n)
    }

    /// Maximum-likelihood covariance of the covariates (divisor n).
    pub fn covariate_cov(&self) -> DMatrix<f64> {
        let c = self.covariates();
        let n = self.n();
        let m = self.covariate_means();
        let mut s = DMatrix::zeros(c, c);
        for i in 0..n {
            for a in 0..c {
                for b in 0..c {
                    s[(a, b)] += (self.x[(i, a)] - m[a]) * (self.x[(i, b)] - m[b]);
                }
            }
        }
        s / n as f64
    }

    /// Copy with mean-centered covariates, plus the subtracted means.
    pub fn centered(&self) -> (Self, DVector<f64>) {
        let m = self.covariate_means();
        let mut x = self.x.clone();
        for k in 0..x.ncols() {
            for i in 0..x.nrows() {
                x[(i, k)] -= m[k];
            }
        }
        (
            Self {
                y: self.y.clone(),
                t: self.t.clone(),
                x,
            },
            m,
        )
    }

    /// Reorder individuals.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.n() {
            return Err(LgmError::Dimension("permutation length".into()));
        }
        let pick = |m: &DMatrix<f64>| DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(order[i], j)]);
        Self::new(pick(&self.y), pick(&self.t), pick(&self.x))
    }
}
