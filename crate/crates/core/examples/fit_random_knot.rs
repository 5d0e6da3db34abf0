//! Fit the random-knot model to simulated data and print estimates next to the truth.

use bilinear_lgm::estimation::{fit_full, FitOptions};
use bilinear_lgm::simgen::{gen_dataset, rng_from_seed, SimCondition};

fn main() {
    let cond = SimCondition::base();
    let mut rng = rng_from_seed(2024);
    let (data, truth) = gen_dataset(&cond, &mut rng).unwrap();
    let fit = fit_full(&data, &FitOptions::default()).unwrap();

    println!(
        "converged={} attempts={} loglik={:.2} aic={:.2} bic={:.2}",
        fit.converged, fit.attempts, fit.loglik, fit.aic, fit.bic
    );
    println!(
        "{:<10} {:>10} {:>10} {:>8} {:>22}",
        "param", "truth", "estimate", "se", "95% ci"
    );
    for (est, (_, tv)) in fit.original_estimates.iter().zip(truth.named_values()) {
        let (lo, hi) = est.ci.unwrap_or((f64::NAN, f64::NAN));
        println!(
            "{:<10} {:>10.4} {:>10.4} {:>8.4} {:>10.4} {:>10.4}",
            est.name,
            tv,
            est.estimate,
            est.se.unwrap_or(f64::NAN),
            lo,
            hi
        );
    }
    if !fit.improper.is_empty() {
        println!("improper: {:?}", fit.improper);
    }
}
