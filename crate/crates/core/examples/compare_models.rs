//! Rank linear, quadratic and both piecewise models by AIC on one dataset.

use bilinear_lgm::estimation::{fit_model, FitOptions, ModelKind};
use bilinear_lgm::simgen::{gen_dataset, rng_from_seed, SimCondition};

fn main() {
    let cond = SimCondition {
        n: 400,
        knot_sd: 0.6,
        explained_share: 0.13,
        ..SimCondition::base()
    };
    let (data, _) = gen_dataset(&cond, &mut rng_from_seed(8)).unwrap();
    let options = FitOptions::default();
    let mut fits: Vec<_> = [
        ModelKind::Full,
        ModelKind::Reduced,
        ModelKind::Linear,
        ModelKind::Quadratic,
    ]
    .into_iter()
    .map(|k| fit_model(k, &data, &options).unwrap())
    .collect();
    fits.sort_by(|a, b| a.aic.total_cmp(&b.aic));
    println!(
        "{:<40} {:>4} {:>10} {:>10} {:>10} {:>8}",
        "model", "p", "-2ll", "aic", "bic", "resid"
    );
    for f in &fits {
        println!(
            "{:<40} {:>4} {:>10.1} {:>10.1} {:>10.1} {:>8.3}",
            f.model.label(),
            f.n_params,
            -2.0 * f.loglik,
            f.aic,
            f.bic,
            f.residual_var
        );
    }
}
