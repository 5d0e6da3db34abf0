//! A small simulation study: bias, empirical SE, RMSE and coverage for one condition.
//!
//! cargo run --release --example monte_carlo -- [S] [workers]

use bilinear_lgm::estimation::FitOptions;
use bilinear_lgm::harness::{run_condition, FimlEstimator, Strategy};
use bilinear_lgm::simgen::SimCondition;

fn main() {
    let mut args = std::env::args().skip(1);
    let s = args.next().and_then(|v| v.parse().ok()).unwrap_or(20);
    let workers = args.next().and_then(|v| v.parse().ok()).unwrap_or(1);
    let cond = SimCondition {
        n: 200,
        ..SimCondition::base()
    };
    let estimator = FimlEstimator::new(FitOptions::default(), Strategy::FullWithFallback);
    let report = run_condition(&cond, s, &estimator, 7, workers).unwrap();

    println!(
        "attempted {} | converged {} | refit with fixed knot {} | negative variance {} | correlation out of range {}",
        report.replications_attempted,
        report.converged,
        report.used_reduced,
        report.improper_negative_variance,
        report.improper_out_of_range
    );
    println!(
        "{:<10} {:>9} {:>9} {:>9} {:>9} {:>9}",
        "param", "truth", "rel.bias", "emp.se", "rel.rmse", "coverage"
    );
    for p in &report.parameters {
        let marker = if p.relative_bias.absolute { "*" } else { "" };
        println!(
            "{:<10} {:>9.4} {:>8.4}{marker:1} {:>9.4} {:>9.4} {:>9.3}",
            p.name,
            p.truth,
            p.relative_bias.value,
            p.empirical_se.unwrap_or(f64::NAN),
            p.relative_rmse.value,
            p.coverage.unwrap_or(f64::NAN)
        );
    }
}
