use std::fs;
use std::process::Command;

use bilinear_lgm::cli::*;
use bilinear_lgm::estimation::{fit_full, FitOptions};
use bilinear_lgm::model::ReparamParams;
use bilinear_lgm::reparam::to_reparam;
use bilinear_lgm::simgen::{condition_to_params, gen_dataset, rng_from_seed, SimCondition};
use bilinear_lgm::LgmError;
use nalgebra::DMatrix;
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_bilinear-lgm");

fn config(text: &str) -> RunConfig {
    RunConfig::from_json(text).unwrap()
}

fn condition_json(n: usize, j: usize, knot: f64, delta: f64) -> String {
    format!(
        r#"{{"n":{n},"J":{j},"knotMean":{knot},"knotSD":0.3,"slopeDiff":-3.2,"explainedShare":0.26,"thetaEps":1,"delta":{delta}}}"#
    )
}

#[test]
fn csv_round_trip_is_lossless_and_fits_agree() {
    let cond = SimCondition {
        n: 200,
        ..SimCondition::base()
    };
    let (ds, _) = gen_dataset(&cond, &mut rng_from_seed(3)).unwrap();
    let mut buf = Vec::new();
    write_wide_csv(&mut buf, &ds, None).unwrap();
    let (ids, back) = read_wide_csv(buf.as_slice()).unwrap();
    assert_eq!(ids.len(), 200);
    assert_eq!(back, ds);
    let header = String::from_utf8(buf).unwrap().lines().next().unwrap().to_string();
    assert!(header.starts_with("id,y1,"));
    assert!(header.ends_with("t10,x1,x2"));
    let opts = FitOptions::default();
    assert_eq!(fit_full(&ds, &opts).unwrap(), fit_full(&back, &opts).unwrap());
}

#[test]
fn long_and_wide_readers_agree() {
    let wide = "id,y1,y2,y3,t1,t2,t3,x1\na,1,2,3,0,1,2,0.5\nb,4,5,6,0,1.1,2,-1\n";
    let long = "id,t,y,x1\na,1,2,0.5\na,0,1,0.5\na,2,3,0.5\nb,0,4,-1\nb,2,6,-1\nb,1.1,5,-1\n";
    let (_, w) = read_wide_csv(wide.as_bytes()).unwrap();
    let (ids, l) = read_long_csv(long.as_bytes()).unwrap();
    assert_eq!(ids, vec!["a".to_string(), "b".to_string()]);
    assert_eq!(w, l);
    let bad = "id,y1,y2,t1,t2\na,1,,0,1\n";
    assert!(read_wide_csv(bad.as_bytes()).is_err());
    let varying = "id,t,y,x1\na,0,1,0.5\na,1,2,0.7\n";
    assert!(read_long_csv(varying.as_bytes()).is_err());
}

#[test]
fn fit_report_blocks() {
    let cfg = config(&format!(
        r#"{{"model":"full","masterSeed":4,"condition":{}}}"#,
        condition_json(250, 10, 4.5, 0.25)
    ));
    let (ds, _) = simulate_dataset(&cfg).unwrap();
    let (report, code) = fit_command_report(&ds, &cfg).unwrap();
    assert_eq!(code, EXIT_OK);
    for key in ["originalParams", "reparamParams", "se", "ci", "fit", "status"] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
    let fit = &report["fit"];
    let ll = fit["loglik"].as_f64().unwrap();
    let p = fit["nParams"].as_f64().unwrap();
    assert!((fit["aic"].as_f64().unwrap() - (-2.0 * ll + 2.0 * p)).abs() < 1e-9);
    assert_eq!(report["status"]["converged"], Value::Bool(true));
    assert_eq!(report["configHash"], Value::String(cfg.hash()));
}

#[test]
fn compare_is_ordered_by_aic() {
    let cfg = config(&format!(
        r#"{{"model":"compare","masterSeed":2,"condition":{}}}"#,
        condition_json(300, 10, 4.5, 0.25)
    ));
    let (ds, _) = simulate_dataset(&cfg).unwrap();
    let (report, _) = fit_command_report(&ds, &cfg).unwrap();
    let rows = report["comparison"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    let aics: Vec<f64> = rows.iter().map(|r| r["aic"].as_f64().unwrap()).collect();
    assert!(aics.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn five_waves_cannot_fit_full_model() {
    let cfg = config(&format!(
        r#"{{"model":"full","condition":{}}}"#,
        condition_json(60, 5, 2.0, 0.25)
    ));
    let (ds, _) = simulate_dataset(&cfg).unwrap();
    let err = fit_command_report(&ds, &cfg).unwrap_err();
    assert_eq!(err.code, EXIT_INPUT);
    let cmp = config(r#"{"model":"compare"}"#);
    let (report, _) = fit_command_report(&ds, &cmp).unwrap();
    assert_eq!(report["skipped"].as_array().unwrap().len(), 1);
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&format!(
        r#"{{"masterSeed":17,"condition":{}}}"#,
        condition_json(20, 6, 2.5, 0.0)
    ));
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let truth = dir.path().join("truth.json");
    cmd_simulate(&cfg, &a, Some(&truth)).unwrap();
    cmd_simulate(&cfg, &b, None).unwrap();
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let (_, ds) = read_wide_csv(fs::File::open(&a).unwrap()).unwrap();
    for i in 0..ds.n() {
        assert_eq!(ds.t_row(i), vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
    }
    let text = fs::read_to_string(&truth).unwrap();
    let file: OriginalParamsFile = serde_json::from_str(&text).unwrap();
    assert_eq!(file.seed, Some(17));
    let cond = cfg.conditions()[0].clone();
    assert_eq!(file.to_params().unwrap(), condition_to_params(&cond).unwrap());
}

#[test]
fn mc_stub_outputs() {
    let cfg = config(&format!(
        r#"{{"model":"truth","masterSeed":1,"S":5,"condition":{}}}"#,
        condition_json(30, 6, 2.5, 0.25)
    ));
    let (json, csv) = mc_outputs(&cfg, 1).unwrap();
    let v: Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["masterSeed"], Value::from(1));
    let rows: Vec<&str> = csv.lines().collect();
    assert!(rows[0].starts_with("condition,n,J,"));
    assert!(rows.len() > 2);
    for line in &rows[1..] {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 19);
        // relative bias and coverage columns of the truth stub
        assert_eq!(cols[13].parse::<f64>().unwrap(), 0.0);
        assert_eq!(cols[17].parse::<f64>().unwrap(), 1.0);
    }
    let grid = config(&format!(
        r#"{{"model":"truth","S":3,"condition":[{},{}]}}"#,
        condition_json(30, 6, 2.5, 0.25),
        condition_json(40, 10, 4.5, 0.25)
    ));
    let (_, csv) = mc_outputs(&grid, 2).unwrap();
    let conditions: std::collections::BTreeSet<&str> =
        csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(conditions.len(), 2);
    let linear = config(&format!(
        r#"{{"model":"linear","condition":{}}}"#,
        condition_json(30, 6, 2.5, 0.25)
    ));
    assert_eq!(mc_outputs(&linear, 1).unwrap_err().code, EXIT_INPUT);
}

#[test]
fn transform_round_trip_and_validation() {
    let truth = condition_to_params(&SimCondition::base()).unwrap();
    let text = serde_json::to_string(&OriginalParamsFile::from_params(&truth)).unwrap();
    let prime_text = transform_json(&text, Direction::ToReparam).unwrap();
    let prime: ReparamParams = serde_json::from_str::<ReparamParamsFile>(&prime_text)
        .unwrap()
        .to_params()
        .unwrap();
    let expected = to_reparam(&truth);
    assert_eq!(prime.alpha_prime, expected.alpha_prime);
    let back: OriginalParamsFile =
        serde_json::from_str(&transform_json(&prime_text, Direction::FromReparam).unwrap()).unwrap();
    let cell: OriginalParamsFile =
        serde_json::from_str(&transform_json(&prime_text, Direction::Cellwise).unwrap()).unwrap();
    let (b, c) = (back.to_params().unwrap(), cell.to_params().unwrap());
    for r in 1..4 {
        for k in 1..4 {
            assert!((b.psi[(r, k)] - truth.psi[(r, k)]).abs() < 1e-10);
        }
    }
    assert!((b.psi - c.psi).amax() < 1e-12);
    assert!((b.b - c.b).amax() < 1e-12);

    let mut asym: Value = serde_json::from_str(&prime_text).unwrap();
    asym["psiPrime"]["data"][1] = Value::from(123.0);
    assert_eq!(
        transform_json(&asym.to_string(), Direction::FromReparam)
            .unwrap_err()
            .code,
        EXIT_INPUT
    );
    let mut extra: Value = serde_json::from_str(&text).unwrap();
    extra["colour"] = Value::from(1);
    assert!(transform_json(&extra.to_string(), Direction::ToReparam).is_err());
}

#[test]
fn error_codes() {
    assert_eq!(CliError::from(LgmError::NonPsdJoint).code, EXIT_NUMERIC);
    assert_eq!(CliError::from(LgmError::NumericFailure("x".into())).code, EXIT_NUMERIC);
    assert_eq!(CliError::from(LgmError::InvalidData("x".into())).code, EXIT_INPUT);
    let m = JsonMatrix::from_dmatrix(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
    assert_eq!(m.data, vec![1.0, 2.0, 3.0, 4.0]);
}

#[test]
fn binary_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    fs::write(
        &cfg_path,
        format!(
            r#"{{"model":"truth","masterSeed":8,"S":3,"condition":{}}}"#,
            condition_json(40, 6, 2.5, 0.25)
        ),
    )
    .unwrap();
    let data = dir.path().join("d.csv");
    let status = Command::new(BIN)
        .args(["simulate", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(&data)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(EXIT_OK));

    let out = Command::new(BIN)
        .args(["mc", "--workers", "2", "--config"])
        .arg(&cfg_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v.get("conditions").is_some() || v.get("reports").is_some());

    let fit_cfg = dir.path().join("fit.json");
    fs::write(&fit_cfg, r#"{"model":"reduced"}"#).unwrap();
    let report = dir.path().join("report.json");
    let status = Command::new(BIN)
        .args(["fit", "--data"])
        .arg(&data)
        .arg("--config")
        .arg(&fit_cfg)
        .arg("--out")
        .arg(&report)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(EXIT_OK));
    let v: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["model"], Value::from("reduced"));

    let missing = Command::new(BIN)
        .args(["fit", "--data", "/nonexistent/file.csv"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(EXIT_INPUT));
    fs::write(&fit_cfg, r#"{"model":"full","bogus":true}"#).unwrap();
    let bad = Command::new(BIN)
        .args(["fit", "--data"])
        .arg(&data)
        .arg("--config")
        .arg(&fit_cfg)
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(EXIT_INPUT));
}
