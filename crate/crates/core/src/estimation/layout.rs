//! Free-parameter layouts and parameter naming.
//!
//! Free vectors are ordered as: factor intercepts, knot (when present),
//! the upper triangle of the factor covariance row by row, the path matrix
//! row-major, and the log residual variance.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::model::{OriginalParams, PolynomialParams, ReducedOriginal, ReducedParams, ReparamParams};
use crate::reparam::{from_reparam, reduce_transform};

/// Which latent growth model to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Linear-linear piecewise model with a random knot.
    Full,
    /// Linear-linear piecewise model with a fixed knot.
    Reduced,
    Linear,
    Quadratic,
}

impl ModelKind {
    pub fn n_factors(self) -> usize {
        match self {
            ModelKind::Full => 4,
            ModelKind::Reduced | ModelKind::Quadratic => 3,
            ModelKind::Linear => 2,
        }
    }

    /// Number of estimated factor intercepts (the knot deviation has none).
    pub(crate) fn n_intercepts(self) -> usize {
        match self {
            ModelKind::Full | ModelKind::Reduced | ModelKind::Quadratic => 3,
            ModelKind::Linear => 2,
        }
    }

    pub(crate) fn has_knot(self) -> bool {
        matches!(self, ModelKind::Full | ModelKind::Reduced)
    }

    /// Minimum number of waves needed for identification.
    pub fn min_waves(self) -> usize {
        match self {
            ModelKind::Full => 6,
            ModelKind::Reduced => 5,
            ModelKind::Quadratic => 4,
            ModelKind::Linear => 3,
        }
    }

    pub fn n_free(self, covariates: usize) -> usize {
        let k = self.n_factors();
        self.n_intercepts() + usize::from(self.has_knot()) + k * (k + 1) / 2 + k * covariates + 1
    }

    /// Human-readable factor names, used by improper-solution flags.
    pub fn factor_names(self) -> &'static [&'static str] {
        match self {
            ModelKind::Full => &["intercept", "slope1", "slope2", "knot"],
            ModelKind::Reduced => &["intercept", "slope1", "slope2"],
            ModelKind::Linear => &["intercept", "slope"],
            ModelKind::Quadratic => &["intercept", "linear", "quadratic"],
        }
    }

    /// Lower-case identifier used in configs and reports.
    pub fn key(self) -> &'static str {
        match self {
            ModelKind::Full => "full",
            ModelKind::Reduced => "reduced",
            ModelKind::Linear => "linear",
            ModelKind::Quadratic => "quadratic",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Full => "Linear-linear piecewise, random knot",
            ModelKind::Reduced => "Linear-linear piecewise, fixed knot",
            ModelKind::Linear => "Linear",
            ModelKind::Quadratic => "Quadratic",
        }
    }
}

/// Estimated parameters in the space the likelihood is maximized over.
#[derive(Debug, Clone, PartialEq)]
pub enum FittedParams {
    Full(ReparamParams),
    Reduced(ReducedParams),
    Polynomial(PolynomialParams),
}

/// Estimated parameters in the interpretable space.
#[derive(Debug, Clone, PartialEq)]
pub enum OriginalSpace {
    Full(OriginalParams),
    Reduced(ReducedOriginal),
    Polynomial(PolynomialParams),
}

impl FittedParams {
    /// Factor intercepts re-expressed at covariate mean `mu_x + shift`.
    pub(crate) fn shift_covariate_mean(&self, shift: &DVector<f64>) -> FittedParams {
        let mut out = self.clone();
        match &mut out {
            FittedParams::Full(p) => {
                p.alpha_prime += Vector4::from_iterator((&p.b_prime * shift).iter().copied());
            }
            FittedParams::Reduced(p) => {
                p.alpha_prime += Vector3::from_iterator((&p.b_prime * shift).iter().copied());
            }
            FittedParams::Polynomial(p) => {
                p.alpha += &p.b * shift;
            }
        }
        out
    }

    pub fn to_original(&self) -> OriginalSpace {
        match self {
            FittedParams::Full(p) => OriginalSpace::Full(from_reparam(p)),
            FittedParams::Reduced(p) => OriginalSpace::Reduced(reduce_transform(p)),
            FittedParams::Polynomial(p) => OriginalSpace::Polynomial(p.clone()),
        }
    }

    pub fn named_values(&self) -> Vec<(String, f64)> {
        match self {
            FittedParams::Full(p) => p.named_values(),
            FittedParams::Reduced(p) => p.named_values(),
            FittedParams::Polynomial(p) => p.named_values(),
        }
    }

    pub fn residual_var(&self) -> f64 {
        match self {
            FittedParams::Full(p) => p.theta_eps,
            FittedParams::Reduced(p) => p.theta_eps,
            FittedParams::Polynomial(p) => p.theta_eps,
        }
    }
}

impl OriginalSpace {
    pub fn named_values(&self) -> Vec<(String, f64)> {
        match self {
            OriginalSpace::Full(p) => p.named_values(),
            OriginalSpace::Reduced(p) => p.named_values(),
            OriginalSpace::Polynomial(p) => p.named_values(),
        }
    }

    /// Factor covariance in the interpretable space.
    pub fn factor_cov(&self) -> DMatrix<f64> {
        match self {
            OriginalSpace::Full(p) => DMatrix::from_iterator(4, 4, p.psi.iter().copied()),
            OriginalSpace::Reduced(p) => DMatrix::from_iterator(3, 3, p.psi.iter().copied()),
            OriginalSpace::Polynomial(p) => p.psi.clone(),
        }
    }
}

const FULL_SYMBOLS: [&str; 4] = ["0", "1", "2", "g"];

fn push_block(
    out: &mut Vec<(String, f64)>,
    symbols: &[&str],
    suffix: &str,
    means: &[(String, f64)],
    cov: &DMatrix<f64>,
    paths: &DMatrix<f64>,
    theta_eps: f64,
) {
    out.extend(means.iter().cloned());
    let k = symbols.len();
    for a in 0..k {
        for b in a..k {
            out.push((format!("psi_{}{}{suffix}", symbols[a], symbols[b]), cov[(a, b)]));
        }
    }
    for a in 0..k {
        for x in 0..paths.ncols() {
            out.push((format!("beta_{}_{}{suffix}", x + 1, symbols[a]), paths[(a, x)]));
        }
    }
    out.push(("theta_eps".to_string(), theta_eps));
}

fn dyn_of<const R: usize, const C: usize>(m: &nalgebra::SMatrix<f64, R, C>) -> DMatrix<f64> {
    DMatrix::from_iterator(R, C, m.iter().copied())
}

impl OriginalParams {
    /// `(name, value)` pairs for means, covariance cells, paths and residual variance.
    pub fn named_values(&self) -> Vec<(String, f64)> {
        let means = vec![
            ("mu_eta0".to_string(), self.alpha[0]),
            ("mu_eta1".to_string(), self.alpha[1]),
            ("mu_eta2".to_string(), self.alpha[2]),
            ("mu_gamma".to_string(), self.alpha[3]),
        ];
        let mut out = Vec::new();
        push_block(
            &mut out,
            &FULL_SYMBOLS,
            "",
            &means,
            &dyn_of(&self.psi),
            &self.b,
            self.theta_eps,
        );
        out
    }
}

impl ReparamParams {
    pub fn named_values(&self) -> Vec<(String, f64)> {
        let means = vec![
            ("mu_eta0_prime".to_string(), self.alpha_prime[0]),
            ("mu_eta1_prime".to_string(), self.alpha_prime[1]),
            ("mu_eta2_prime".to_string(), self.alpha_prime[2]),
            ("mu_gamma".to_string(), self.alpha_prime[3]),
        ];
        let mut out = Vec::new();
        push_block(
            &mut out,
            &FULL_SYMBOLS,
            "_prime",
            &means,
            &dyn_of(&self.psi_prime),
            &self.b_prime,
            self.theta_eps,
        );
        out
    }
}

impl ReducedOriginal {
    pub fn named_values(&self) -> Vec<(String, f64)> {
        let means = vec![
            ("mu_eta0".to_string(), self.alpha[0]),
            ("mu_eta1".to_string(), self.alpha[1]),
            ("mu_eta2".to_string(), self.alpha[2]),
            ("mu_gamma".to_string(), self.gamma),
        ];
        let mut out = Vec::new();
        push_block(
            &mut out,
            &FULL_SYMBOLS[..3],
            "",
            &means,
            &dyn_of(&self.psi),
            &self.b,
            self.theta_eps,
        );
        out
    }
}

impl ReducedParams {
    pub fn named_values(&self) -> Vec<(String, f64)> {
        let means = vec![
            ("mu_eta0_prime".to_string(), self.alpha_prime[0]),
            ("mu_eta1_prime".to_string(), self.alpha_prime[1]),
            ("mu_eta2_prime".to_string(), self.alpha_prime[2]),
            ("mu_gamma".to_string(), self.gamma),
        ];
        let mut out = Vec::new();
        push_block(
            &mut out,
            &FULL_SYMBOLS[..3],
            "_prime",
            &means,
            &dyn_of(&self.psi_prime),
            &self.b_prime,
            self.theta_eps,
        );
        out
    }
}

impl PolynomialParams {
    pub fn named_values(&self) -> Vec<(String, f64)> {
        let k = self.degree + 1;
        let means: Vec<(String, f64)> = (0..k).map(|a| (format!("mu_eta{a}"), self.alpha[a])).collect();
        let mut out = Vec::new();
        push_block(
            &mut out,
            &FULL_SYMBOLS[..k],
            "",
            &means,
            &self.psi,
            &self.b,
            self.theta_eps,
        );
        out
    }
}

/// Unpacked point of the free vector, shared by all model kinds.
#[derive(Debug, Clone)]
pub(crate) struct Point {
    /// Factor intercepts, length `k`; the knot deviation entry is zero.
    pub intercepts: DVector<f64>,
    pub knot: f64,
    pub psi: DMatrix<f64>,
    pub paths: DMatrix<f64>,
    pub theta: f64,
}

pub(crate) fn unpack(kind: ModelKind, c: usize, free: &[f64]) -> Point {
    let k = kind.n_factors();
    let mut pos = 0;
    let mut intercepts = DVector::zeros(k);
    for a in 0..kind.n_intercepts() {
        intercepts[a] = free[pos];
        pos += 1;
    }
    let knot = if kind.has_knot() {
        pos += 1;
        free[pos - 1]
    } else {
        0.0
    };
    let mut psi = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            psi[(a, b)] = free[pos];
            psi[(b, a)] = free[pos];
            pos += 1;
        }
    }
    let mut paths = DMatrix::zeros(k, c);
    for a in 0..k {
        for x in 0..c {
            paths[(a, x)] = free[pos];
            pos += 1;
        }
    }
    let theta = free[pos].exp();
    Point {
        intercepts,
        knot,
        psi,
        paths,
        theta,
    }
}

pub(crate) fn pack(kind: ModelKind, point: &Point) -> Vec<f64> {
    let k = kind.n_factors();
    let c = point.paths.ncols();
    let mut out = Vec::with_capacity(kind.n_free(c));
    out.extend(point.intercepts.iter().take(kind.n_intercepts()));
    if kind.has_knot() {
        out.push(point.knot);
    }
    for a in 0..k {
        for b in a..k {
            out.push(point.psi[(a, b)]);
        }
    }
    for a in 0..k {
        for x in 0..c {
            out.push(point.paths[(a, x)]);
        }
    }
    out.push(point.theta.ln());
    out
}

pub(crate) fn point_to_params(kind: ModelKind, point: &Point, mu_x: &DVector<f64>, phi: &DMatrix<f64>) -> FittedParams {
    let p = point;
    match kind {
        ModelKind::Full => FittedParams::Full(ReparamParams {
            alpha_prime: Vector4::new(p.intercepts[0], p.intercepts[1], p.intercepts[2], p.knot),
            psi_prime: Matrix4::from_iterator(p.psi.iter().copied()),
            b_prime: p.paths.clone(),
            mu_x: mu_x.clone(),
            phi: phi.clone(),
            theta_eps: p.theta,
        }),
        ModelKind::Reduced => FittedParams::Reduced(ReducedParams {
            alpha_prime: Vector3::new(p.intercepts[0], p.intercepts[1], p.intercepts[2]),
            gamma: p.knot,
            psi_prime: Matrix3::from_iterator(p.psi.iter().copied()),
            b_prime: p.paths.clone(),
            mu_x: mu_x.clone(),
            phi: phi.clone(),
            theta_eps: p.theta,
        }),
        ModelKind::Linear | ModelKind::Quadratic => FittedParams::Polynomial(PolynomialParams {
            degree: kind.n_factors() - 1,
            alpha: p.intercepts.clone(),
            psi: p.psi.clone(),
            b: p.paths.clone(),
            mu_x: mu_x.clone(),
            phi: phi.clone(),
            theta_eps: p.theta,
        }),
    }
}

pub(crate) fn params_to_point(params: &FittedParams) -> Point {
    match params {
        FittedParams::Full(p) => Point {
            intercepts: DVector::from_vec(vec![p.alpha_prime[0], p.alpha_prime[1], p.alpha_prime[2], 0.0]),
            knot: p.alpha_prime[3],
            psi: dyn_of(&p.psi_prime),
            paths: p.b_prime.clone(),
            theta: p.theta_eps,
        },
        FittedParams::Reduced(p) => Point {
            intercepts: DVector::from_iterator(3, p.alpha_prime.iter().copied()),
            knot: p.gamma,
            psi: dyn_of(&p.psi_prime),
            paths: p.b_prime.clone(),
            theta: p.theta_eps,
        },
        FittedParams::Polynomial(p) => Point {
            intercepts: p.alpha.clone(),
            knot: 0.0,
            psi: p.psi.clone(),
            paths: p.b.clone(),
            theta: p.theta_eps,
        },
    }
}
