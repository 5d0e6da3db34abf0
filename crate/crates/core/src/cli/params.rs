//! JSON parameter files. Matrices are stored row-major with their dimensions.

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{LgmError, Result};
use crate::model::{OriginalParams, ReparamParams};

/// Largest tolerated asymmetry of a covariance matrix.
pub const SYMMETRY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JsonMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl JsonMatrix {
    pub fn from_dmatrix(m: &DMatrix<f64>) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for r in 0..m.nrows() {
            data.extend(m.row(r).iter());
        }
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }

    pub fn to_dmatrix(&self, name: &str) -> Result<DMatrix<f64>> {
        if self.rows * self.cols != self.data.len() {
            return Err(LgmError::Dimension(format!(
                "{name}: {}x{} matrix needs {} entries, found {}",
                self.rows,
                self.cols,
                self.rows * self.cols,
                self.data.len()
            )));
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(LgmError::InvalidArgument(format!("{name}: entries must be finite")));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

fn check_shape(name: &str, m: &DMatrix<f64>, rows: usize, cols: usize) -> Result<()> {
    if m.nrows() != rows || m.ncols() != cols {
        return Err(LgmError::Dimension(format!(
            "{name} must be {rows}x{cols}, found {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

fn check_symmetric(name: &str, m: &DMatrix<f64>) -> Result<()> {
    for a in 0..m.nrows() {
        for b in (a + 1)..m.ncols() {
            if (m[(a, b)] - m[(b, a)]).abs() > SYMMETRY_TOL {
                return Err(LgmError::InvalidArgument(format!(
                    "{name} is not symmetric at ({}, {})",
                    a + 1,
                    b + 1
                )));
            }
        }
    }
    Ok(())
}

fn vec4(name: &str, v: &[f64]) -> Result<Vector4<f64>> {
    if v.len() != 4 || v.iter().any(|x| !x.is_finite()) {
        return Err(LgmError::Dimension(format!("{name} must hold 4 finite values")));
    }
    Ok(Vector4::from_column_slice(v))
}

fn mat4(m: &DMatrix<f64>) -> Matrix4<f64> {
    Matrix4::from_iterator(m.iter().copied())
}

fn dyn4(m: &Matrix4<f64>) -> DMatrix<f64> {
    DMatrix::from_iterator(4, 4, m.iter().copied())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct OriginalParamsFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub alpha: Vec<f64>,
    pub psi: JsonMatrix,
    pub b: JsonMatrix,
    pub mu_x: Vec<f64>,
    pub phi: JsonMatrix,
    pub theta_eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ReparamParamsFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub alpha_prime: Vec<f64>,
    pub psi_prime: JsonMatrix,
    pub b_prime: JsonMatrix,
    pub mu_x: Vec<f64>,
    pub phi: JsonMatrix,
    pub theta_eps: f64,
}

struct Blocks {
    alpha: Vector4<f64>,
    psi: DMatrix<f64>,
    b: DMatrix<f64>,
    mu_x: DVector<f64>,
    phi: DMatrix<f64>,
}

fn validate_blocks(
    names: [&str; 3],
    alpha: &[f64],
    psi: &JsonMatrix,
    b: &JsonMatrix,
    mu_x: &[f64],
    phi: &JsonMatrix,
    theta: f64,
) -> Result<Blocks> {
    let alpha = vec4(names[0], alpha)?;
    let psi = psi.to_dmatrix(names[1])?;
    check_shape(names[1], &psi, 4, 4)?;
    check_symmetric(names[1], &psi)?;
    let c = mu_x.len();
    let b = b.to_dmatrix(names[2])?;
    check_shape(names[2], &b, 4, c)?;
    let phi = phi.to_dmatrix("phi")?;
    check_shape("phi", &phi, c, c)?;
    check_symmetric("phi", &phi)?;
    if !theta.is_finite() || mu_x.iter().any(|v| !v.is_finite()) {
        return Err(LgmError::InvalidArgument("thetaEps and muX must be finite".into()));
    }
    Ok(Blocks {
        alpha,
        psi,
        b,
        mu_x: DVector::from_column_slice(mu_x),
        phi,
    })
}

impl OriginalParamsFile {
    pub fn from_params(p: &OriginalParams) -> Self {
        Self {
            config_hash: None,
            seed: None,
            alpha: p.alpha.iter().copied().collect(),
            psi: JsonMatrix::from_dmatrix(&dyn4(&p.psi)),
            b: JsonMatrix::from_dmatrix(&p.b),
            mu_x: p.mu_x.iter().copied().collect(),
            phi: JsonMatrix::from_dmatrix(&p.phi),
            theta_eps: p.theta_eps,
        }
    }

    pub fn to_params(&self) -> Result<OriginalParams> {
        let b = validate_blocks(
            ["alpha", "psi", "b"],
            &self.alpha,
            &self.psi,
            &self.b,
            &self.mu_x,
            &self.phi,
            self.theta_eps,
        )?;
        Ok(OriginalParams {
            alpha: b.alpha,
            psi: mat4(&b.psi),
            b: b.b,
            mu_x: b.mu_x,
            phi: b.phi,
            theta_eps: self.theta_eps,
        })
    }
}

impl ReparamParamsFile {
    pub fn from_params(p: &ReparamParams) -> Self {
        Self {
            config_hash: None,
            seed: None,
            alpha_prime: p.alpha_prime.iter().copied().collect(),
            psi_prime: JsonMatrix::from_dmatrix(&dyn4(&p.psi_prime)),
            b_prime: JsonMatrix::from_dmatrix(&p.b_prime),
            mu_x: p.mu_x.iter().copied().collect(),
            phi: JsonMatrix::from_dmatrix(&p.phi),
            theta_eps: p.theta_eps,
        }
    }

    pub fn to_params(&self) -> Result<ReparamParams> {
        let b = validate_blocks(
            ["alphaPrime", "psiPrime", "bPrime"],
            &self.alpha_prime,
            &self.psi_prime,
            &self.b_prime,
            &self.mu_x,
            &self.phi,
            self.theta_eps,
        )?;
        Ok(ReparamParams {
            alpha_prime: b.alpha,
            psi_prime: mat4(&b.psi),
            b_prime: b.b,
            mu_x: b.mu_x,
            phi: b.phi,
            theta_eps: self.theta_eps,
        })
    }
}
