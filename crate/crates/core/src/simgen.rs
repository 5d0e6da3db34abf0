//! Synthetic data following the simulation design.
//!
//! A condition fixes the population parameters; growth factors and
//! covariates are drawn jointly, each individual gets jittered measurement
//! occasions around unit-spaced waves, and outcomes follow the bilinear
//! trajectory plus independent normal noise.

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{LgmError, Result};
use crate::model::{predict_trajectory, GrowthFactors, LongitudinalDataset, OriginalParams};

pub const INTERCEPT_MEAN: f64 = 100.0;
pub const INTERCEPT_VAR: f64 = 25.0;
pub const SLOPE1_MEAN: f64 = -5.0;
pub const SLOPE_VAR: f64 = 1.0;
pub const FACTOR_CORRELATION: f64 = 0.3;
pub const COVARIATES: usize = 2;

fn default_delta() -> f64 {
    0.25
}

/// One cell of the simulation design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SimCondition {
    pub n: usize,
    #[serde(rename = "J")]
    pub j: usize,
    pub knot_mean: f64,
    #[serde(rename = "knotSD")]
    pub knot_sd: f64,
    /// `μη1 − μη2`.
    pub slope_diff: f64,
    pub explained_share: f64,
    pub theta_eps: f64,
    /// Half-width of the window around each wave.
    #[serde(default = "default_delta")]
    pub delta: f64,
}

impl SimCondition {
    /// Ten waves, midway knot, moderate knot spread, large slope change.
    pub fn base() -> Self {
        Self {
            n: 500,
            j: 10,
            knot_mean: 4.5,
            knot_sd: 0.3,
            slope_diff: -3.2,
            explained_share: 0.26,
            theta_eps: 1.0,
            delta: 0.25,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(LgmError::InvalidCondition(m));
        if self.n < 1 {
            return bad("n must be at least 1".into());
        }
        if self.j < 2 {
            return bad("J must be at least 2".into());
        }
        let last = (self.j - 1) as f64;
        if !(self.knot_mean > 0.0 && self.knot_mean < last) {
            return bad(format!(
                "knotMean {} must lie strictly inside (0, {last})",
                self.knot_mean
            ));
        }
        if !self.knot_sd.is_finite() || self.knot_sd < 0.0 {
            return bad("knotSD must be finite and non-negative".into());
        }
        if !(self.explained_share > 0.0 && self.explained_share < 1.0) {
            return bad("explainedShare must lie in (0, 1)".into());
        }
        if !self.theta_eps.is_finite() || self.theta_eps < 0.0 {
            return bad("thetaEps must be finite and non-negative".into());
        }
        if !(self.delta >= 0.0 && self.delta < 0.5) {
            return bad("delta must lie in [0, 0.5)".into());
        }
        if !self.slope_diff.is_finite() {
            return bad("slopeDiff must be finite".into());
        }
        Ok(())
    }
}

/// Population parameters of a condition.
pub fn condition_to_params(cond: &SimCondition) -> Result<OriginalParams> {
    cond.validate()?;
    let alpha = Vector4::new(
        INTERCEPT_MEAN,
        SLOPE1_MEAN,
        SLOPE1_MEAN - cond.slope_diff,
        cond.knot_mean,
    );
    let sd = [INTERCEPT_VAR.sqrt(), SLOPE_VAR.sqrt(), SLOPE_VAR.sqrt(), cond.knot_sd];
    let psi = Matrix4::from_fn(|a, b| {
        if a == b {
            sd[a] * sd[a]
        } else {
            FACTOR_CORRELATION * sd[a] * sd[b]
        }
    });
    let share = cond.explained_share;
    let b = DMatrix::from_fn(4, COVARIATES, |k, _| {
        (share * psi[(k, k)] / (COVARIATES as f64 * (1.0 - share))).sqrt()
    });
    Ok(OriginalParams {
        alpha,
        psi,
        b,
        mu_x: DVector::zeros(COVARIATES),
        phi: DMatrix::identity(COVARIATES, COVARIATES),
        theta_eps: cond.theta_eps,
    })
}

/// Mean and covariance of the stacked vector `(η, X)`.
pub fn joint_factor_tic_moments(theta: &OriginalParams) -> (DVector<f64>, DMatrix<f64>) {
    let c = theta.mu_x.len();
    let b = &theta.b;
    let bphi = b * &theta.phi;
    let top = &bphi * b.transpose() + DMatrix::from_iterator(4, 4, theta.psi.iter().copied());
    let eta_mean = DVector::from_iterator(4, theta.alpha.iter().copied()) + b * &theta.mu_x;
    let mut mu = DVector::zeros(4 + c);
    mu.rows_mut(0, 4).copy_from(&eta_mean);
    mu.rows_mut(4, c).copy_from(&theta.mu_x);
    let mut sigma = DMatrix::zeros(4 + c, 4 + c);
    sigma.view_mut((0, 0), (4, 4)).copy_from(&top);
    sigma.view_mut((0, 4), (4, c)).copy_from(&bphi);
    sigma.view_mut((4, 0), (c, 4)).copy_from(&bphi.transpose());
    sigma.view_mut((4, 4), (c, c)).copy_from(&theta.phi);
    let sym = (&sigma + sigma.transpose()) * 0.5;
    (mu, sym)
}

/// Lower factor `L` with `L Lᵀ = sigma` for a positive semidefinite `sigma`.
fn psd_factor(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(ch) = sigma.clone().cholesky() {
        return Ok(ch.l());
    }
    let eig = sigma.clone().symmetric_eigen();
    let scale = eig.eigenvalues.amax().max(1.0);
    if eig.eigenvalues.iter().any(|&l| l < -1e-10 * scale) {
        return Err(LgmError::NonPsdJoint);
    }
    let root = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&root))
}

/// `n` joint draws of growth factors (columns η0, η1, η2, γ) and covariates.
///
/// Coordinates with zero variance are held at their mean and excluded from
/// the factorization.
pub fn sample_factors_tics<R: Rng + ?Sized>(
    theta: &OriginalParams,
    n: usize,
    rng: &mut R,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (mu, sigma) = joint_factor_tic_moments(theta);
    let dim = mu.len();
    let active: Vec<usize> = (0..dim).filter(|&a| sigma[(a, a)] != 0.0).collect();
    for a in 0..dim {
        if sigma[(a, a)] < 0.0 {
            return Err(LgmError::NonPsdJoint);
        }
        if !active.contains(&a) && (0..dim).any(|b| sigma[(a, b)] != 0.0) {
            return Err(LgmError::NonPsdJoint);
        }
    }
    let sub = DMatrix::from_fn(active.len(), active.len(), |r, c| sigma[(active[r], active[c])]);
    let l = psd_factor(&sub)?;
    let m = active.len();
    let c = dim - 4;
    let mut eta = DMatrix::zeros(n, 4);
    let mut x = DMatrix::zeros(n, c);
    let mut z = DVector::zeros(m);
    for i in 0..n {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let dev = &l * &z;
        let mut draw = mu.clone();
        for (r, &a) in active.iter().enumerate() {
            draw[a] += dev[r];
        }
        for a in 0..4 {
            eta[(i, a)] = draw[a];
        }
        for a in 0..c {
            x[(i, a)] = draw[4 + a];
        }
    }
    Ok((eta, x))
}

/// Individual measurement occasions: wave `j` shifted by `U(−delta, delta)`.
pub fn gen_schedule<R: Rng + ?Sized>(n: usize, waves: usize, delta: f64, rng: &mut R) -> DMatrix<f64> {
    let mut t = DMatrix::zeros(n, waves);
    for i in 0..n {
        for j in 0..waves {
            let u: f64 = rng.random();
            t[(i, j)] = j as f64 + delta * (2.0 * u - 1.0);
        }
    }
    t
}

/// A dataset drawn from `cond`, together with its population parameters.
pub fn gen_dataset<R: Rng + ?Sized>(cond: &SimCondition, rng: &mut R) -> Result<(LongitudinalDataset, OriginalParams)> {
    let truth = condition_to_params(cond)?;
    let (eta, x) = sample_factors_tics(&truth, cond.n, rng)?;
    let t = gen_schedule(cond.n, cond.j, cond.delta, rng);
    let sd = cond.theta_eps.sqrt();
    let mut y = DMatrix::zeros(cond.n, cond.j);
    for i in 0..cond.n {
        let f = GrowthFactors {
            eta0: eta[(i, 0)],
            eta1: eta[(i, 1)],
            eta2: eta[(i, 2)],
            gamma: eta[(i, 3)],
        };
        let t_row: Vec<f64> = t.row(i).iter().copied().collect();
        for (j, mean) in predict_trajectory(&f, &t_row).into_iter().enumerate() {
            let e: f64 = rng.sample(StandardNormal);
            y[(i, j)] = mean + sd * e;
        }
    }
    Ok((LongitudinalDataset::new(y, t, x)?, truth))
}

/// Seed of replication `index` under `master_seed`.
pub fn replication_seed(master_seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng.random()
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn design_values() {
        let mut cond = SimCondition::base();
        cond.slope_diff = -1.6;
        let p = condition_to_params(&cond).unwrap();
        assert!((p.alpha[2] - -3.4).abs() < 1e-12);
        assert!((p.psi[(3, 3)] - 0.09).abs() < 1e-12);
        cond.knot_sd = 0.0;
        let p = condition_to_params(&cond).unwrap();
        assert!(p.b.row(3).iter().all(|&v| v == 0.0));
        assert_eq!(p.psi[(3, 3)], 0.0);
    }

    #[test]
    fn knot_outside_range_rejected() {
        let mut cond = SimCondition::base();
        cond.knot_mean = 9.0;
        assert!(matches!(condition_to_params(&cond), Err(LgmError::InvalidCondition(_))));
    }

    #[test]
    fn zero_delta_schedule_is_integer() {
        let mut rng = rng_from_seed(1);
        let t = gen_schedule(3, 6, 0.0, &mut rng);
        for i in 0..3 {
            for j in 0..6 {
                assert_eq!(t[(i, j)], j as f64);
            }
        }
    }

    #[test]
    fn replication_seeds_differ() {
        assert_ne!(replication_seed(1, 0), replication_seed(1, 1));
        assert_eq!(replication_seed(5, 3), replication_seed(5, 3));
    }
}
