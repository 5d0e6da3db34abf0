//! Transforms between the original and the reparameterized parameter spaces.
//!
//! Means go through `f`/`h`; covariances and covariate paths go through the
//! Jacobians `∇f`/`∇h` (first-order delta method). The displayed pair of
//! Jacobians is not an exact inverse pair: `∇f(μ)·∇h(f(μ))` carries `μη1`
//! at cell (1, 4). [`InverseJacobian::Exact`] uses `∇f⁻¹` instead.

use nalgebra::{DMatrix, Matrix3, Matrix4, Vector3, Vector4};

use crate::model::{OriginalParams, ReducedOriginal, ReducedParams, ReparamParams};

/// Which matrix maps reparameterized covariances back to the original space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InverseJacobian {
    /// `∇h` with a zero in cell (1, 4).
    #[default]
    Displayed,
    /// The exact inverse of `∇f`, with `−μη1` in cell (1, 4).
    Exact,
}

/// `f` evaluated at the original means (μη0, μη1, μη2, μγ). The fourth entry
/// is the mean of the knot deviation, which is zero.
pub fn f_mean(mu: &Vector4<f64>) -> Vector4<f64> {
    Vector4::new(mu[0] + mu[3] * mu[1], 0.5 * (mu[1] + mu[2]), 0.5 * (mu[2] - mu[1]), 0.0)
}

/// `h` evaluated at reparameterized means whose fourth entry is the mean
/// knot deviation.
pub fn h_mean(mu_prime: &Vector4<f64>, knot_mean: f64) -> Vector4<f64> {
    Vector4::new(
        mu_prime[0] - knot_mean * mu_prime[1] + knot_mean * mu_prime[2],
        mu_prime[1] - mu_prime[2],
        mu_prime[1] + mu_prime[2],
        mu_prime[3] + knot_mean,
    )
}

/// `∇f` at the original means.
#[rustfmt::skip]
pub fn jac_f(mu: &Vector4<f64>) -> Matrix4<f64> {
    Matrix4::new(
        1.0, mu[3], 0.0, mu[1],
        0.0, 0.5,   0.5, 0.0,
        0.0, -0.5,  0.5, 0.0,
        0.0, 0.0,   0.0, 1.0,
    )
}

/// `∇h` for knot mean `knot_mean`.
#[rustfmt::skip]
pub fn jac_h(knot_mean: f64) -> Matrix4<f64> {
    Matrix4::new(
        1.0, -knot_mean, knot_mean, 0.0,
        0.0, 1.0,        -1.0,      0.0,
        0.0, 1.0,        1.0,       0.0,
        0.0, 0.0,        0.0,       1.0,
    )
}

/// Exact inverse of `∇f(μ)`.
pub fn jac_f_inverse(mu: &Vector4<f64>) -> Matrix4<f64> {
    let mut m = jac_h(mu[3]);
    m[(0, 3)] = -mu[1];
    m
}

fn means_of(alpha_prime: &Vector4<f64>) -> Vector4<f64> {
    // alpha_prime[3] is the knot mean; the deviation factor has mean zero.
    let with_zero_delta = Vector4::new(alpha_prime[0], alpha_prime[1], alpha_prime[2], 0.0);
    h_mean(&with_zero_delta, alpha_prime[3])
}

/// Original → reparameterized space. Covariates must be centered.
pub fn to_reparam(theta: &OriginalParams) -> ReparamParams {
    let jf = jac_f(&theta.alpha);
    let fm = f_mean(&theta.alpha);
    let mut psi_prime = jf * theta.psi * jf.transpose();
    symmetrize4(&mut psi_prime);
    ReparamParams {
        alpha_prime: Vector4::new(fm[0], fm[1], fm[2], theta.alpha[3]),
        psi_prime,
        b_prime: dyn4(&jf) * &theta.b,
        mu_x: theta.mu_x.clone(),
        phi: theta.phi.clone(),
        theta_eps: theta.theta_eps,
    }
}

/// Reparameterized → original space using the displayed `∇h`.
pub fn from_reparam(theta_prime: &ReparamParams) -> OriginalParams {
    from_reparam_with(theta_prime, InverseJacobian::Displayed)
}

pub fn from_reparam_with(theta_prime: &ReparamParams, variant: InverseJacobian) -> OriginalParams {
    let alpha = means_of(&theta_prime.alpha_prime);
    let jh = match variant {
        InverseJacobian::Displayed => jac_h(theta_prime.alpha_prime[3]),
        InverseJacobian::Exact => jac_f_inverse(&alpha),
    };
    let mut psi = jh * theta_prime.psi_prime * jh.transpose();
    symmetrize4(&mut psi);
    OriginalParams {
        alpha,
        psi,
        b: dyn4(&jh) * &theta_prime.b_prime,
        mu_x: theta_prime.mu_x.clone(),
        phi: theta_prime.phi.clone(),
        theta_eps: theta_prime.theta_eps,
    }
}

/// Reparameterized → original space written out cell by cell.
pub fn from_reparam_cellwise(theta_prime: &ReparamParams) -> OriginalParams {
    let a = &theta_prime.alpha_prime;
    let p = &theta_prime.psi_prime;
    let g = a[3];
    let alpha = Vector4::new(a[0] - g * a[1] + g * a[2], a[1] - a[2], a[2] + a[1], g);

    let (p00, p01, p02, p0g) = (p[(0, 0)], p[(0, 1)], p[(0, 2)], p[(0, 3)]);
    let (p11, p12, p1g) = (p[(1, 1)], p[(1, 2)], p[(1, 3)]);
    let (p22, p2g) = (p[(2, 2)], p[(2, 3)]);
    let pgg = p[(3, 3)];

    let s00 = (p11 + p22 - 2.0 * p12) * g * g + 2.0 * (p02 - p01) * g + p00;
    let s01 = (2.0 * p12 - p11 - p22) * g + (p01 - p02);
    let s02 = (p22 - p11) * g + (p01 + p02);
    let s0g = (p2g - p1g) * g + p0g;
    let s11 = p11 + p22 - 2.0 * p12;
    let s12 = p11 - p22;
    let s1g = p1g - p2g;
    let s22 = p11 + p22 + 2.0 * p12;
    let s2g = p1g + p2g;
    let sgg = pgg;

    #[rustfmt::skip]
    let psi = Matrix4::new(
        s00, s01, s02, s0g,
        s01, s11, s12, s1g,
        s02, s12, s22, s2g,
        s0g, s1g, s2g, sgg,
    );

    let bp = &theta_prime.b_prime;
    let b = DMatrix::from_fn(4, bp.ncols(), |r, k| {
        let (b0, b1, b2, bg) = (bp[(0, k)], bp[(1, k)], bp[(2, k)], bp[(3, k)]);
        match r {
            0 => b0 - g * b1 + g * b2,
            1 => b1 - b2,
            2 => b1 + b2,
            _ => bg,
        }
    });

    OriginalParams {
        alpha,
        psi,
        b,
        mu_x: theta_prime.mu_x.clone(),
        phi: theta_prime.phi.clone(),
        theta_eps: theta_prime.theta_eps,
    }
}

/// Upper-left 3×3 block of `∇f` with the knot fixed at `gamma`.
#[rustfmt::skip]
pub fn jac_f_reduced(gamma: f64) -> Matrix3<f64> {
    Matrix3::new(
        1.0, gamma, 0.0,
        0.0, 0.5,   0.5,
        0.0, -0.5,  0.5,
    )
}

/// Upper-left 3×3 block of `∇h` with the knot fixed at `gamma`.
#[rustfmt::skip]
pub fn jac_h_reduced(gamma: f64) -> Matrix3<f64> {
    Matrix3::new(
        1.0, -gamma, gamma,
        0.0, 1.0,    -1.0,
        0.0, 1.0,    1.0,
    )
}

/// Fixed-knot reparameterized → original space.
pub fn reduce_transform(theta_prime: &ReducedParams) -> ReducedOriginal {
    let g = theta_prime.gamma;
    let a = &theta_prime.alpha_prime;
    let jh = jac_h_reduced(g);
    let mut psi = jh * theta_prime.psi_prime * jh.transpose();
    symmetrize3(&mut psi);
    ReducedOriginal {
        alpha: Vector3::new(a[0] - g * a[1] + g * a[2], a[1] - a[2], a[1] + a[2]),
        gamma: g,
        psi,
        b: dyn3(&jh) * &theta_prime.b_prime,
        mu_x: theta_prime.mu_x.clone(),
        phi: theta_prime.phi.clone(),
        theta_eps: theta_prime.theta_eps,
    }
}

/// Fixed-knot original → reparameterized space.
pub fn reduce_to_reparam(theta: &ReducedOriginal) -> ReducedParams {
    let g = theta.gamma;
    let a = &theta.alpha;
    let jf = jac_f_reduced(g);
    let mut psi_prime = jf * theta.psi * jf.transpose();
    symmetrize3(&mut psi_prime);
    ReducedParams {
        alpha_prime: Vector3::new(a[0] + g * a[1], 0.5 * (a[1] + a[2]), 0.5 * (a[2] - a[1])),
        gamma: g,
        psi_prime,
        b_prime: dyn3(&jf) * &theta.b,
        mu_x: theta.mu_x.clone(),
        phi: theta.phi.clone(),
        theta_eps: theta.theta_eps,
    }
}

fn dyn4(m: &Matrix4<f64>) -> DMatrix<f64> {
    DMatrix::from_iterator(4, 4, m.iter().copied())
}

fn dyn3(m: &Matrix3<f64>) -> DMatrix<f64> {
    DMatrix::from_iterator(3, 3, m.iter().copied())
}

fn symmetrize4(m: &mut Matrix4<f64>) {
    for i in 0..4 {
        for j in (i + 1)..4 {
            m[(j, i)] = m[(i, j)];
        }
    }
}

fn symmetrize3(m: &mut Matrix3<f64>) {
    for i in 0..3 {
        for j in (i + 1)..3 {
            m[(j, i)] = m[(i, j)];
        }
    }
}
