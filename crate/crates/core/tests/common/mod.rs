//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use bilinear_lgm::model::ReparamParams;
use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Dense normal log density via an explicit inverse and determinant.
pub fn dense_log_density(y: &DVector<f64>, mu: &DVector<f64>, sigma: &DMatrix<f64>) -> f64 {
    let k = y.len() as f64;
    let inv = sigma.clone().try_inverse().unwrap();
    let det = sigma.determinant();
    let r = y - mu;
    let q = (r.transpose() * inv * &r)[(0, 0)];
    -0.5 * k * (2.0 * PI).ln() - 0.5 * det.ln() - 0.5 * q
}

fn loading_row(t: f64, g: f64, hd: f64) -> [f64; 4] {
    let d = t - g;
    let s = if d > 0.0 {
        1.0
    } else if d < 0.0 {
        -1.0
    } else {
        0.0
    };
    [1.0, d, d.abs(), -hd * (1.0 + s)]
}

pub fn random_pd(rng: &mut ChaCha8Rng, k: usize, scale: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(k, k, |_, _| rng.random_range(-1.0..1.0) * scale);
    &a * a.transpose() + DMatrix::identity(k, k) * 0.05
}

pub fn random_case(rng: &mut ChaCha8Rng) -> (ReparamParams, Vec<f64>, Vec<f64>, Vec<f64>) {
    let j = rng.random_range(3..11);
    let c = rng.random_range(0..3);
    let psi = random_pd(rng, 4, 1.0);
    let p = ReparamParams {
        alpha_prime: Vector4::new(
            rng.random_range(50.0..120.0),
            rng.random_range(-5.0..0.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(2.0..(j as f64 - 1.5).max(2.5)),
        ),
        psi_prime: Matrix4::from_iterator(psi.iter().copied()),
        b_prime: DMatrix::from_fn(4, c, |_, _| rng.random_range(-1.0..1.0)),
        mu_x: DVector::from_fn(c, |_, _| rng.random_range(-1.0..1.0)),
        phi: random_pd(rng, c, 0.8),
        theta_eps: rng.random_range(0.3..3.0),
    };
    let t: Vec<f64> = (0..j).map(|k| k as f64 + rng.random_range(-0.25..0.25)).collect();
    let y: Vec<f64> = (0..j).map(|_| rng.random_range(60.0..110.0)).collect();
    let x: Vec<f64> = (0..c).map(|_| rng.random_range(-2.0..2.0)).collect();
    (p, y, t, x)
}

/// Joint density of (y, x) built from the stacked covariance.
pub fn oracle_joint(p: &ReparamParams, y: &[f64], t: &[f64], x: &[f64]) -> f64 {
    let j = y.len();
    let c = x.len();
    let g = p.alpha_prime[3];
    let lam = DMatrix::from_fn(j, 4, |r, col| loading_row(t[r], g, p.alpha_prime[2])[col]);
    let alpha = DVector::from_vec(vec![p.alpha_prime[0], p.alpha_prime[1], p.alpha_prime[2], 0.0]);
    let psi = DMatrix::from_iterator(4, 4, p.psi_prime.iter().copied());
    let b = &p.b_prime;
    let eta_cov = &psi + b * &p.phi * b.transpose();
    let syy = &lam * eta_cov * lam.transpose() + DMatrix::identity(j, j) * p.theta_eps;
    let syx = &lam * b * &p.phi;
    let mut sigma = DMatrix::zeros(j + c, j + c);
    sigma.view_mut((0, 0), (j, j)).copy_from(&syy);
    sigma.view_mut((0, j), (j, c)).copy_from(&syx);
    sigma.view_mut((j, 0), (c, j)).copy_from(&syx.transpose());
    sigma.view_mut((j, j), (c, c)).copy_from(&p.phi);
    let mut mu = DVector::zeros(j + c);
    mu.rows_mut(0, j).copy_from(&(&lam * (alpha + b * &p.mu_x)));
    mu.rows_mut(j, c).copy_from(&p.mu_x);
    let mut v = DVector::zeros(j + c);
    v.rows_mut(0, j).copy_from(&DVector::from_column_slice(y));
    v.rows_mut(j, c).copy_from(&DVector::from_column_slice(x));
    dense_log_density(&v, &mu, &sigma)
}

pub fn oracle_conditional(p: &ReparamParams, y: &[f64], t: &[f64], x: &[f64]) -> f64 {
    let j = y.len();
    let g = p.alpha_prime[3];
    let lam = DMatrix::from_fn(j, 4, |r, col| loading_row(t[r], g, p.alpha_prime[2])[col]);
    let alpha = DVector::from_vec(vec![p.alpha_prime[0], p.alpha_prime[1], p.alpha_prime[2], 0.0]);
    let psi = DMatrix::from_iterator(4, 4, p.psi_prime.iter().copied());
    let mean = &lam * (alpha + &p.b_prime * DVector::from_column_slice(x));
    let sigma = &lam * psi * lam.transpose() + DMatrix::identity(j, j) * p.theta_eps;
    dense_log_density(&DVector::from_column_slice(y), &mean, &sigma)
}
