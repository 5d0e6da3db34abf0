//! BFGS minimizer with a backtracking Armijo line search.
//!
//! The objective returns `None` outside its domain (for example when an
//! implied covariance is not positive definite); such trial points are
//! treated as infinitely bad and the step is shortened.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct BfgsSettings {
    pub grad_tol: f64,
    pub rel_f_tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Gradient,
    RelativeChange,
    LineSearch,
    MaxIterations,
    InvalidStart,
}

#[derive(Debug, Clone)]
pub struct BfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub reason: StopReason,
}

impl BfgsOutcome {
    pub fn converged(&self) -> bool {
        matches!(self.reason, StopReason::Gradient | StopReason::RelativeChange)
    }

    pub fn grad_max_norm(&self) -> f64 {
        max_norm(&self.grad)
    }
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

/// Minimize `objective` from `x0`. `inv_hessian0` seeds the inverse Hessian
/// approximation; without it a scaled identity is used.
pub fn minimize<F>(
    mut objective: F,
    x0: &[f64],
    inv_hessian0: Option<DMatrix<f64>>,
    settings: &BfgsSettings,
) -> BfgsOutcome
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let Some((mut f, g0)) = objective(x0) else {
        return BfgsOutcome {
            x: x0.to_vec(),
            f: f64::INFINITY,
            grad: vec![f64::NAN; n],
            iterations: 0,
            reason: StopReason::InvalidStart,
        };
    };
    let mut x = DVector::from_column_slice(x0);
    let mut g = DVector::from_vec(g0);
    let seeded = inv_hessian0.is_some();
    let fallback = |g: &DVector<f64>| {
        let scale = 1.0 / g.amax().max(1.0);
        DMatrix::<f64>::identity(n, n) * scale
    };
    let mut h = inv_hessian0.unwrap_or_else(|| fallback(&g));
    let mut first_update = !seeded;
    let mut reset_used = false;

    for iter in 0..settings.max_iter {
        if g.amax() <= settings.grad_tol {
            return finish(x, f, g, iter, StopReason::Gradient);
        }
        let mut dir = -(&h * &g);
        let mut slope = g.dot(&dir);
        if slope >= 0.0 || !slope.is_finite() {
            h = fallback(&g);
            first_update = true;
            dir = -(&h * &g);
            slope = g.dot(&dir);
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial = &x + &dir * step;
            if let Some((ft, gt)) = objective(trial.as_slice()) {
                if ft.is_finite() && ft <= f + ARMIJO_C1 * step * slope {
                    accepted = Some((trial, ft, DVector::from_vec(gt)));
                    break;
                }
            }
            step *= 0.5;
        }

        let Some((x_new, f_new, g_new)) = accepted else {
            if !reset_used {
                reset_used = true;
                h = fallback(&g);
                first_update = true;
                continue;
            }
            // No descent along the steepest direction at any representable step.
            return finish(x, f, g, iter, StopReason::LineSearch);
        };

        let full_step = step == 1.0;
        let rel_change = (f - f_new).abs() / f.abs().max(1.0);
        let s = &x_new - &x;
        let y = &g_new - &g;
        x = x_new;
        g = g_new;
        f = f_new;

        if g.amax() <= settings.grad_tol {
            return finish(x, f, g, iter + 1, StopReason::Gradient);
        }
        if full_step && rel_change <= settings.rel_f_tol {
            return finish(x, f, g, iter + 1, StopReason::RelativeChange);
        }

        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if first_update {
                h = DMatrix::identity(n, n) * (sy / y.dot(&y));
                first_update = false;
            }
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            // H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ
            h += (&s * s.transpose()) * (rho * rho * yhy + rho) - (&hy * s.transpose() + &s * hy.transpose()) * rho;
        }
    }
    let iters = settings.max_iter;
    finish(x, f, g, iters, StopReason::MaxIterations)
}

fn finish(x: DVector<f64>, f: f64, g: DVector<f64>, iterations: usize, reason: StopReason) -> BfgsOutcome {
    BfgsOutcome {
        x: x.as_slice().to_vec(),
        f,
        grad: g.as_slice().to_vec(),
        iterations,
        reason,
    }
}
