use bilinear_lgm::estimation::{FitOptions, ParamEstimate};
use bilinear_lgm::harness::{
    metric_coverage, metric_empirical_se, metric_relative_bias, metric_relative_rmse, run_condition,
    run_condition_detailed, summarize_grid, Estimator, FimlEstimator, MetricsReport, RepOutcome, Spread, Strategy,
    TruthEstimator, ZERO_TRUTH,
};
use bilinear_lgm::model::{LongitudinalDataset, OriginalParams};
use bilinear_lgm::simgen::{replication_seed, SimCondition};
use proptest::prelude::*;

fn small() -> SimCondition {
    SimCondition {
        n: 50,
        j: 6,
        knot_mean: 2.5,
        delta: 0.0,
        ..SimCondition::base()
    }
}

/// Sample mean of the first wave with an exact-variance Wald interval.
struct FirstWaveMean {
    variance: f64,
}

impl Estimator for FirstWaveMean {
    fn estimate(&self, ds: &LongitudinalDataset, _truth: &OriginalParams, _seed: u64) -> RepOutcome {
        let n = ds.n() as f64;
        let m = ds.y().column(0).mean();
        let half = 1.959963984540054 * (self.variance / n).sqrt();
        RepOutcome {
            index: 0,
            seed: 0,
            converged: true,
            used_reduced: false,
            attempts_to_converge: 1,
            improper: Default::default(),
            estimates: vec![ParamEstimate {
                name: "mu_eta0".into(),
                estimate: m,
                se: Some((self.variance / n).sqrt()),
                ci: Some((m - half, m + half)),
            }],
            full_fit: None,
        }
    }
}

/// Converges only for seeds that are not multiples of three.
struct Picky;

impl Estimator for Picky {
    fn estimate(&self, ds: &LongitudinalDataset, truth: &OriginalParams, seed: u64) -> RepOutcome {
        let mut out = TruthEstimator::default().estimate(ds, truth, seed);
        out.converged = !seed.is_multiple_of(3);
        out
    }
}

fn first_wave_variance(cond: &SimCondition) -> f64 {
    25.0 / (1.0 - cond.explained_share) + cond.theta_eps
}

#[test]
fn truth_stub_gives_zero_bias_full_coverage() {
    let report = run_condition(&small(), 5, &TruthEstimator::default(), 1, 1).unwrap();
    assert_eq!(report.converged, 5);
    assert_eq!(report.replications_attempted, 5);
    assert!(!report.parameters.is_empty());
    for p in &report.parameters {
        assert_eq!(p.relative_bias.value, 0.0, "{}", p.name);
        assert_eq!(p.relative_rmse.value, 0.0);
        assert_eq!(p.coverage, Some(1.0));
        assert_eq!(p.empirical_se, Some(0.0));
    }
}

#[test]
fn scaled_stub_gives_exact_relative_bias() {
    let est = TruthEstimator {
        scale: 1.1,
        half_width: 0.1,
    };
    let report = run_condition(&small(), 4, &est, 2, 1).unwrap();
    for p in &report.parameters {
        if p.truth.abs() >= ZERO_TRUTH {
            assert!((p.relative_bias.value - 0.1).abs() < 1e-12, "{}", p.name);
            assert!(!p.relative_bias.absolute);
        } else {
            assert!(p.relative_bias.absolute);
        }
    }
}

#[test]
fn metric_examples_from_hand_computation() {
    let mut cis = vec![(0.0, 2.0); 950];
    cis.extend(vec![(3.0, 4.0); 50]);
    assert!((metric_coverage(&cis, 1.0).unwrap() - 0.95).abs() < 1e-15);
    assert_eq!(metric_coverage(&[(1.0, 1.0); 3], 1.0).unwrap(), 1.0);
    assert_eq!(metric_coverage(&[(2.0, 3.0); 3], 1.0).unwrap(), 0.0);
    assert!(metric_coverage(&[], 1.0).is_err());
    let a = metric_empirical_se(&[1.0, 2.0, 4.0]).unwrap();
    let b = metric_empirical_se(&[11.0, 12.0, 14.0]).unwrap();
    assert!((a - b).abs() < 1e-12);
    assert_eq!(metric_relative_rmse(&[2.0; 5], 2.0).value, 0.0);
    assert!(matches!(
        metric_empirical_se(&[]),
        Err(bilinear_lgm::LgmError::TooFewReps { .. })
    ));
}

fn naive_bias(e: &[f64], t: f64) -> f64 {
    let mut s = 0.0;
    for x in e {
        s += x - t;
    }
    s / (e.len() as f64 * t)
}

fn naive_rmse(e: &[f64], t: f64) -> f64 {
    let mut s = 0.0;
    for x in e {
        s += (x - t) * (x - t);
    }
    (s / e.len() as f64).sqrt() / t
}

fn naive_sd(e: &[f64]) -> f64 {
    let n = e.len() as f64;
    let m = e.iter().sum::<f64>() / n;
    let mut s = 0.0;
    for x in e {
        s += (x - m) * (x - m);
    }
    (s / (n - 1.0)).sqrt()
}

proptest! {
    #[test]
    fn metrics_match_naive_versions(
        e in proptest::collection::vec(-10.0f64..10.0, 2..60),
        t in prop_oneof![0.5f64..20.0, -20.0f64..-0.5],
        lo in proptest::collection::vec(-5.0f64..5.0, 1..40),
    ) {
        let rb = metric_relative_bias(&e, t).value;
        let rm = metric_relative_rmse(&e, t).value;
        let sd = metric_empirical_se(&e).unwrap();
        prop_assert!((rb - naive_bias(&e, t)).abs() <= 1e-12 * (1.0 + rb.abs()));
        prop_assert!((rm - naive_rmse(&e, t)).abs() <= 1e-12 * (1.0 + rm.abs()));
        prop_assert!((sd - naive_sd(&e)).abs() <= 1e-12 * (1.0 + sd));
        prop_assert!(rm * rm >= rb * rb - 1e-12);
        let cis: Vec<(f64, f64)> = lo.iter().map(|&l| (l, l + 1.0)).collect();
        let hits = cis.iter().filter(|c| c.0 <= 0.0 && 0.0 <= c.1).count() as f64;
        let cov = metric_coverage(&cis, 0.0).unwrap();
        prop_assert!((cov - hits / cis.len() as f64).abs() < 1e-15);
        prop_assert!((0.0..=1.0).contains(&cov));
    }
}

#[test]
fn gaussian_mean_coverage_self_test() {
    let cond = small();
    let est = FirstWaveMean {
        variance: first_wave_variance(&cond),
    };
    let report = run_condition(&cond, 1000, &est, 20240601, 1).unwrap();
    let p = report.parameter("mu_eta0").unwrap();
    assert_eq!(p.count, 1000);
    let cov = p.coverage.unwrap();
    let band = 2.5758 * (0.95 * 0.05 / 1000.0f64).sqrt();
    assert!((cov - 0.95).abs() <= band, "coverage {cov}");
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let cond = small();
    let est = FirstWaveMean {
        variance: first_wave_variance(&cond),
    };
    let one = run_condition_detailed(&cond, 37, &est, 5, 1).unwrap();
    let four = run_condition_detailed(&cond, 37, &est, 5, 4).unwrap();
    assert_eq!(one.report, four.report);
    assert_eq!(one.outcomes, four.outcomes);
}

#[test]
fn kept_outcomes_are_first_convergent_seeds() {
    let master = 99;
    for workers in [1, 3] {
        let run = run_condition_detailed(&small(), 10, &Picky, master, workers).unwrap();
        let expected: Vec<u64> = (0u64..)
            .filter(|&i| !replication_seed(master, i).is_multiple_of(3))
            .take(10)
            .collect();
        let got: Vec<u64> = run.outcomes.iter().map(|o| o.index).collect();
        assert_eq!(got, expected);
        assert_eq!(run.report.replications_attempted as u64, expected[9] + 1);
        assert_eq!(run.report.converged, 10);
    }
}

#[test]
fn grid_summary() {
    let conds = [
        small(),
        SimCondition { n: 60, ..small() },
        SimCondition { n: 70, ..small() },
    ];
    let reports: Vec<MetricsReport> = conds
        .iter()
        .zip([1.1, 1.2, 1.3])
        .map(|(c, scale)| run_condition(c, 2, &TruthEstimator { scale, half_width: 0.1 }, 1, 1).unwrap())
        .collect();
    let summary = summarize_grid(&reports).unwrap();
    let mu = summary.iter().find(|s| s.name == "mu_eta0").unwrap();
    assert_eq!(mu.conditions, 3);
    assert!((mu.relative_bias.median - 0.2).abs() < 1e-12);
    assert!((mu.relative_bias.min - 0.1).abs() < 1e-12);
    assert!((mu.relative_bias.max - 0.3).abs() < 1e-12);
    let single = summarize_grid(&reports[..1]).unwrap();
    let s = single.iter().find(|s| s.name == "mu_eta0").unwrap();
    assert_eq!(s.relative_bias.min, s.relative_bias.max);
    assert_eq!(s.relative_bias.median, s.relative_bias.min);
    assert!(summarize_grid(&[]).is_err());
    assert_eq!(Spread::of(&[0.3, 0.1, 0.2]).unwrap().median, 0.2);
}

#[test]
fn fallback_only_after_improper_full_fit() {
    let cond = SimCondition {
        n: 200,
        knot_sd: 0.0,
        theta_eps: 2.0,
        slope_diff: 1.6,
        explained_share: 0.13,
        ..SimCondition::base()
    };
    let est = FimlEstimator::new(FitOptions::default(), Strategy::FullWithFallback);
    let run = run_condition_detailed(&cond, 4, &est, 3, 1).unwrap();
    for o in &run.outcomes {
        let full = o.full_fit.as_ref().unwrap();
        assert!(full.converged);
        assert_eq!(o.used_reduced, full.is_improper());
        assert_eq!(o.improper, full.improper);
        if o.used_reduced {
            assert!(o.estimates.iter().any(|p| p.name == "mu_gamma"));
            assert!(o
                .estimates
                .iter()
                .all(|p| !(p.name.starts_with("psi_") && p.name.contains('g')) && !p.name.ends_with("_g")));
        }
    }
    assert!(run_condition(&cond, 0, &est, 3, 1).is_err());
}
