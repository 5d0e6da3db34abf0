//! Starting values and retry jitter.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{LgmError, Result};
use crate::estimation::layout::{point_to_params, FittedParams, ModelKind, Point};
use crate::model::{build_loadings_polynomial, build_loadings_reduced, LongitudinalDataset};
use crate::reparam::f_mean;

/// Least-squares coefficients of `y` on the columns of `design`.
fn least_squares(design: &DMatrix<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
    let xtx = design.transpose() * design;
    let xty = design.transpose() * y;
    xtx.cholesky().map(|c| c.solve(&xty))
}

fn pooled_line(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    let n = points.len() as f64;
    let mt = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = points.iter().map(|p| (p.0 - mt).powi(2)).sum();
    if points.len() < 2 || stt <= 0.0 {
        return Err(LgmError::DegenerateData(
            "need at least two distinct times on each side of the knot".into(),
        ));
    }
    let sty: f64 = points.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let slope = sty / stt;
    Ok((my - slope * mt, slope))
}

/// Starting values in the estimable space, with covariates centered.
///
/// The knot starts at the midpoint of the pooled time range. Pooled
/// least-squares lines on each side of it give the intercept and the two
/// slopes. Factor variances come from the spread of per-individual
/// least-squares coefficients; the residual variance from their pooled
/// residuals. Paths start at zero.
pub fn initial_values(dataset: &LongitudinalDataset, kind: ModelKind) -> Result<FittedParams> {
    let n = dataset.n();
    let waves = dataset.waves();
    let c = dataset.covariates();
    let t = dataset.t();
    let y = dataset.y();
    let t_min = t.min();
    let t_max = t.max();
    if t_max <= t_min {
        return Err(LgmError::DegenerateData("all measurement times coincide".into()));
    }
    let k = kind.n_factors();
    let mut intercepts = DVector::zeros(k);
    let mut knot = 0.0;

    match kind {
        ModelKind::Full | ModelKind::Reduced => {
            knot = 0.5 * (t_min + t_max);
            let mut left = Vec::new();
            let mut right = Vec::new();
            for i in 0..n {
                for j in 0..waves {
                    let p = (t[(i, j)], y[(i, j)]);
                    if p.0 <= knot {
                        left.push(p);
                    } else {
                        right.push(p);
                    }
                }
            }
            let (b0, b1) = pooled_line(&left)?;
            let (_, b2) = pooled_line(&right)?;
            let prime = f_mean(&nalgebra::Vector4::new(b0, b1, b2, knot));
            intercepts[0] = prime[0];
            intercepts[1] = prime[1];
            intercepts[2] = prime[2];
        }
        ModelKind::Linear | ModelKind::Quadratic => {
            let rows = n * waves;
            let design = DMatrix::from_fn(rows, k, |r, col| t[(r / waves, r % waves)].powi(col as i32));
            let yy = DVector::from_fn(rows, |r, _| y[(r / waves, r % waves)]);
            let coef = least_squares(&design, &yy)
                .ok_or_else(|| LgmError::DegenerateData("pooled polynomial design is singular".into()))?;
            intercepts.rows_mut(0, k).copy_from(&coef);
        }
    }

    // Per-individual fits on the fixed-knot or polynomial design.
    let fit_cols = match kind {
        ModelKind::Full | ModelKind::Reduced => 3,
        _ => k,
    };
    let mut coefs: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut rss = 0.0;
    let mut dof = 0usize;
    for i in 0..n {
        let t_row = dataset.t_row(i);
        let design = match kind {
            ModelKind::Full | ModelKind::Reduced => build_loadings_reduced(&t_row, knot),
            _ => build_loadings_polynomial(&t_row, k - 1),
        };
        let yi = DVector::from_vec(dataset.y_row(i));
        if let Some(b) = least_squares(&design, &yi) {
            if waves > fit_cols {
                let r = &yi - &design * &b;
                rss += r.dot(&r);
                dof += waves - fit_cols;
            }
            coefs.push(b);
        }
    }
    let theta = if dof > 0 && rss > 0.0 { rss / dof as f64 } else { 1.0 };

    let spacing = (t_max - t_min) / (waves.max(2) - 1) as f64;
    let mut psi = DMatrix::zeros(k, k);
    for a in 0..fit_cols {
        let var = if coefs.len() >= 2 {
            let m = coefs.iter().map(|b| b[a]).sum::<f64>() / coefs.len() as f64;
            coefs.iter().map(|b| (b[a] - m).powi(2)).sum::<f64>() / (coefs.len() - 1) as f64
        } else {
            0.0
        };
        psi[(a, a)] = var.max(1e-3 * theta).max(1e-6);
    }
    if kind == ModelKind::Full {
        psi[(3, 3)] = 0.1 * spacing * spacing;
    }

    let point = Point {
        intercepts,
        knot,
        psi,
        paths: DMatrix::zeros(k, c),
        theta,
    };
    Ok(point_to_params(kind, &point, &DVector::zeros(c), &DMatrix::zeros(c, c)))
}

/// Multiply every free entry (in natural scale) by an independent
/// `U(0.8, 1.2)` factor drawn from the stream keyed by `(seed, attempt)`.
pub(crate) fn jitter(free: &[f64], seed: u64, attempt: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(attempt);
    let n = free.len();
    free.iter()
        .enumerate()
        .map(|(idx, &v)| {
            let u: f64 = rng.random_range(0.8..1.2);
            if idx + 1 == n {
                // log residual variance
                (v.exp() * u).ln()
            } else {
                v * u
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::layout::params_to_point;

    fn line_data(slope: f64) -> LongitudinalDataset {
        let n = 4;
        let t = DMatrix::from_fn(n, 10, |i, j| j as f64 + 0.05 * i as f64);
        let y = DMatrix::from_fn(n, 10, |i, j| 3.0 + slope * t[(i, j)]);
        LongitudinalDataset::new(y, t, DMatrix::zeros(n, 0)).unwrap()
    }

    #[test]
    fn knot_starts_mid_range() {
        let t = DMatrix::from_fn(3, 10, |_, j| j as f64);
        let y = DMatrix::from_fn(3, 10, |i, j| (i + j) as f64);
        let d = LongitudinalDataset::new(y, t, DMatrix::zeros(3, 0)).unwrap();
        let p = params_to_point(&initial_values(&d, ModelKind::Full).unwrap());
        assert_eq!(p.knot, 4.5);
    }

    #[test]
    fn single_line_gives_equal_slopes() {
        let p = initial_values(&line_data(0.7), ModelKind::Full).unwrap();
        let FittedParams::Full(r) = p else { panic!() };
        // mean slope 0.7, half-difference 0
        assert!((r.alpha_prime[1] - 0.7).abs() < 1e-6);
        assert!(r.alpha_prime[2].abs() < 1e-6);
    }

    #[test]
    fn coincident_times_are_degenerate() {
        let t = DMatrix::from_element(2, 1, 1.0);
        let y = DMatrix::from_element(2, 1, 1.0);
        let d = LongitudinalDataset::new(y, t, DMatrix::zeros(2, 0)).unwrap();
        assert!(matches!(
            initial_values(&d, ModelKind::Full),
            Err(LgmError::DegenerateData(_))
        ));
    }

    #[test]
    fn jitter_is_deterministic_per_attempt() {
        let free = vec![1.0, 2.0, 3.0, 0.0];
        assert_eq!(jitter(&free, 7, 2), jitter(&free, 7, 2));
        assert_ne!(jitter(&free, 7, 2), jitter(&free, 7, 3));
        for (a, b) in free.iter().zip(jitter(&free, 1, 1)) {
            if *a != 0.0 {
                assert!((b / a) >= 0.8 && (b / a) <= 1.2);
            }
        }
    }
}
