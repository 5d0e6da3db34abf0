//! JSON and CSV renderings of results.

use serde_json::{json, Map, Value};

use crate::estimation::{FitResult, ParamEstimate};
use crate::harness::{MetricsReport, ParamSummary};

fn values(est: &[ParamEstimate]) -> Value {
    Value::Object(est.iter().map(|p| (p.name.clone(), json!(p.estimate))).collect())
}

fn ses(est: &[ParamEstimate]) -> Value {
    Value::Object(est.iter().map(|p| (p.name.clone(), json!(p.se))).collect())
}

fn cis(est: &[ParamEstimate]) -> Value {
    Value::Object(
        est.iter()
            .map(|p| (p.name.clone(), p.ci.map_or(Value::Null, |(lo, hi)| json!([lo, hi]))))
            .collect(),
    )
}

/// Report of a single fit.
pub fn fit_report(fit: &FitResult) -> Value {
    let flags: Vec<String> = fit.improper.iter().map(ToString::to_string).collect();
    json!({
        "model": fit.model,
        "mode": fit.mode,
        "originalParams": values(&fit.original_estimates),
        "reparamParams": values(&fit.reparam_estimates),
        "se": {
            "original": ses(&fit.original_estimates),
            "reparam": ses(&fit.reparam_estimates),
        },
        "ci": {
            "level": fit.ci_level,
            "original": cis(&fit.original_estimates),
            "reparam": cis(&fit.reparam_estimates),
        },
        "fit": {
            "loglik": fit.loglik,
            "aic": fit.aic,
            "bic": fit.bic,
            "residualVar": fit.residual_var,
            "nParams": fit.n_params,
            "n": fit.n_obs,
        },
        "status": {
            "converged": fit.converged,
            "attempts": fit.attempts,
            "iterations": fit.iterations,
            "improperFlags": flags,
            "informationSingular": fit.information_singular,
        },
        "covariateMeans": fit.covariate_means.iter().copied().collect::<Vec<_>>(),
    })
}

/// Comparison table rows ordered by AIC.
pub fn comparison_table(fits: &[FitResult]) -> Value {
    let mut order: Vec<&FitResult> = fits.iter().collect();
    order.sort_by(|a, b| a.aic.total_cmp(&b.aic));
    Value::Array(
        order
            .into_iter()
            .map(|f| {
                json!({
                    "model": f.model,
                    "label": f.model.label(),
                    "loglik": f.loglik,
                    "minus2Loglik": -2.0 * f.loglik,
                    "aic": f.aic,
                    "bic": f.bic,
                    "residualVar": f.residual_var,
                    "nParams": f.n_params,
                    "converged": f.converged,
                })
            })
            .collect(),
    )
}

pub fn with_provenance(mut report: Value, config_hash: &str, seed: u64) -> Value {
    if let Value::Object(map) = &mut report {
        map.insert("configHash".into(), json!(config_hash));
        map.insert("seed".into(), json!(seed));
    }
    report
}

pub fn metrics_json(
    reports: &[MetricsReport],
    summary: &[ParamSummary],
    model: &Value,
    s: usize,
    config_hash: &str,
    master_seed: u64,
) -> Value {
    let mut map = Map::new();
    map.insert("configHash".into(), json!(config_hash));
    map.insert("masterSeed".into(), json!(master_seed));
    map.insert("S".into(), json!(s));
    map.insert("model".into(), model.clone());
    map.insert("conditions".into(), json!(reports));
    map.insert("summary".into(), json!(summary));
    Value::Object(map)
}

const METRIC_COLUMNS: [&str; 19] = [
    "condition",
    "n",
    "J",
    "knotMean",
    "knotSD",
    "slopeDiff",
    "explainedShare",
    "thetaEps",
    "delta",
    "parameter",
    "truth",
    "count",
    "meanEstimate",
    "relativeBias",
    "biasIsAbsolute",
    "empiricalSE",
    "relativeRMSE",
    "coverage",
    "mcSEBias",
];

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// One row per parameter per condition.
pub fn metrics_csv(reports: &[MetricsReport]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(METRIC_COLUMNS).expect("in-memory write");
    for (k, r) in reports.iter().enumerate() {
        let c = &r.condition;
        for p in &r.parameters {
            w.write_record([
                (k + 1).to_string(),
                c.n.to_string(),
                c.j.to_string(),
                c.knot_mean.to_string(),
                c.knot_sd.to_string(),
                c.slope_diff.to_string(),
                c.explained_share.to_string(),
                c.theta_eps.to_string(),
                c.delta.to_string(),
                p.name.clone(),
                p.truth.to_string(),
                p.count.to_string(),
                p.mean_estimate.to_string(),
                p.relative_bias.value.to_string(),
                p.relative_bias.absolute.to_string(),
                opt(p.empirical_se),
                p.relative_rmse.value.to_string(),
                opt(p.coverage),
                opt(p.mc_se_bias),
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}
