use std::path::{Path, PathBuf};

use clap::Parser;

use crate::cli::{execute, Cli};
use crate::commands::{Evaluation, SavedModel, Selection};
use crate::io;
use crate::study::StudyRow;

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("care-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

struct Output {
    code: i32,
    stdout: Vec<PathBuf>,
    stderr: String,
}

/// Runs the command line in-process with `--config` and `--out` taken relative to `dir`.
fn care(dir: &Path, args: &[&str]) -> Output {
    let mut argv = vec!["care".to_string()];
    let mut relative = false;
    for a in args {
        argv.push(if relative { dir.join(a).display().to_string() } else { a.to_string() });
        relative = matches!(*a, "--config" | "--out");
    }
    if !args.contains(&"--out") {
        argv.extend(["--out".to_string(), dir.join("care").display().to_string()]);
    }
    let cli = Cli::try_parse_from(&argv).unwrap();
    match execute(&cli) {
        Ok(paths) => Output { code: 0, stdout: paths, stderr: String::new() },
        Err(e) => Output { code: e.exit_code(), stdout: Vec::new(), stderr: e.to_string() },
    }
}

fn code(o: &Output) -> i32 {
    o.code
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

/// Simulated 160-record fixture split into `sim_train.csv` / `sim_valid.csv`.
fn fixture(dir: &Path) {
    write(dir, "sim.json", r#"{"n": 160, "split": true, "seed": 11}"#);
    let o = care(dir, &["simulate", "--config", "sim.json", "--out", "sim", "--quiet"]);
    assert_eq!(code(&o), 0, "{}", o.stderr);
}

#[test]
fn simulate_writes_data_and_truth() {
    let dir = workdir("simulate");
    let o = care(&dir, &["simulate", "--n", "30", "--seed", "5", "--out", "s"]);
    assert_eq!(code(&o), 0);
    let data = io::read_dataset(&dir.join("s.csv")).unwrap();
    let (xs, f0) = io::read_truth(&dir.join("s_truth.csv")).unwrap();
    assert_eq!(data.len(), 30);
    assert_eq!(xs, data.covariates());
    assert_eq!(f0.len(), 30);

    write(&dir, "neg.json", r#"{"n": -5}"#);
    let o = care(&dir, &["simulate", "--config", "neg.json"]);
    assert_eq!(code(&o), 2);
    assert!(o.stderr.contains("n:"));

    let o = care(&dir, &["simulate", "--n", "10", "--out", "/nonexistent-dir/x"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn care_selects_inside_grid_and_simplex() {
    let dir = workdir("care");
    fixture(&dir);
    write(
        &dir,
        "care.json",
        r#"{"train": "sim_train.csv", "valid": "sim_valid.csv",
            "gamma_grid": {"min": 1e-4, "max": 1, "count": 8},
            "theta_resolution": 10,
            "externals": [{"kind": "builtin", "name": "perturbed"}]}"#,
    );
    let o = care(&dir, &["care", "--config", "care.json", "--out", "c", "--quiet"]);
    assert_eq!(code(&o), 0, "{}", o.stderr);
    assert_eq!(o.stdout.len(), 4);

    let sel: Selection = io::read_json(&dir.join("c_selection.json")).unwrap();
    let grid = care_core::GammaGrid::geometric(1e-4, 1.0, 8).unwrap();
    assert!(grid.values().contains(&sel.gamma));
    assert_eq!(sel.theta.len(), 1);
    assert!((0.0..=1.0).contains(&sel.theta[0]));

    let table = io::read_cv_table(&dir.join("c_cv.csv")).unwrap();
    assert_eq!(table.externals, vec!["perturbed".to_string()]);
    assert_eq!(table.rows.len(), 8 * 11);
    let best = table.rows.iter().map(|r| r.valid_loss).fold(f64::INFINITY, f64::min);
    assert_eq!(best, sel.valid_loss);

    let model: SavedModel = io::read_json(&dir.join("c_model.json")).unwrap();
    let SavedModel::Care(summary) = model else {
        panic!("expected a CARE model")
    };
    assert_eq!(summary.theta, sel.theta);
    let preds = io::read_predictions(&dir.join("c_predictions.csv")).unwrap();
    assert_eq!(preds.len(), 160);

    // the stored model reproduces the validation loss
    let valid = io::read_dataset(&dir.join("sim_valid.csv")).unwrap();
    let v: Vec<f64> = preds.iter().filter(|r| r.sample == "valid").map(|r| r.prediction).collect();
    let loss = care_core::validation_loss(&v, &valid).unwrap();
    assert!((loss - sel.valid_loss).abs() <= 1e-12);

    write(&dir, "ev.json", r#"{"data": "sim_valid.csv", "model": "c_model.json", "l2_against_dgp": true}"#);
    let o = care(&dir, &["evaluate", "--config", "ev.json", "--out", "e", "--quiet"]);
    assert_eq!(code(&o), 0, "{}", o.stderr);
    let ev: Evaluation = io::read_json(&dir.join("e_evaluation.json")).unwrap();
    assert_eq!(ev.records, 80);
    assert!(ev.concordance.unwrap() > 0.5);
    assert!(ev.l2_error.unwrap() < 1.0);
    let curve = io::read_step_survival(&dir.join("e_breslow.csv")).unwrap();
    assert_eq!(curve, care_core::breslow_survival(&valid));
}

#[test]
fn care_config_errors() {
    let dir = workdir("errors");
    fixture(&dir);
    write(&dir, "short.csv", "prediction\n0.1\n0.2\n");
    write(
        &dir,
        "table.json",
        r#"{"train": "sim_train.csv", "valid": "sim_valid.csv",
            "externals": [{"kind": "table", "name": "s", "train": "short.csv", "valid": "short.csv"}]}"#,
    );
    assert_eq!(code(&care(&dir, &["care", "--config", "table.json", "--out", "x"])), 2);

    write(
        &dir,
        "empty.json",
        r#"{"train": "sim_train.csv", "valid": "sim_valid.csv", "gamma_grid": {"min": 1e-3, "max": 1, "count": 0}}"#,
    );
    assert_eq!(code(&care(&dir, &["care", "--config", "empty.json", "--out", "x"])), 2);

    write(&dir, "unknown.json", r#"{"train": "sim_train.csv", "colour": "red"}"#);
    let o = care(&dir, &["cv", "--config", "unknown.json", "--out", "x"]);
    assert_eq!(code(&o), 2);
    assert!(o.stderr.contains("colour"));

    write(
        &dir,
        "starved.json",
        r#"{"train": "sim_train.csv", "valid": "sim_valid.csv", "optimizer": {"max_iterations": 0},
            "gamma_grid": {"min": 1e-3, "max": 1, "count": 3}}"#,
    );
    assert_eq!(code(&care(&dir, &["cv", "--config", "starved.json", "--out", "x"])), 4);

    write(&dir, "bad_data.csv", "x1,time,event\n0.5,1,2\n");
    write(&dir, "bad.json", r#"{"data": "bad_data.csv", "gamma": 0.1}"#);
    assert_eq!(code(&care(&dir, &["fit", "--config", "bad.json", "--out", "x"])), 3);
}

#[test]
fn table_externals_match_builtin() {
    let dir = workdir("tables");
    fixture(&dir);
    let cfg = care_core::DgpConfig::univariate();
    for part in ["train", "valid"] {
        let data = io::read_dataset(&dir.join(format!("sim_{part}.csv"))).unwrap();
        let mut text = String::from("prediction\n");
        for x in data.covariates() {
            text.push_str(&format!("{}\n", care_core::external_predictor(&cfg, x).unwrap()));
        }
        write(&dir, &format!("ext_{part}.csv"), &text);
    }
    let base = r#""train": "sim_train.csv", "valid": "sim_valid.csv", "gamma_grid": {"min": 1e-3, "max": 1, "count": 5}"#;
    write(
        &dir,
        "a.json",
        &format!(r#"{{{base}, "externals": [{{"kind": "table", "name": "perturbed", "train": "ext_train.csv", "valid": "ext_valid.csv"}}]}}"#),
    );
    write(&dir, "b.json", &format!(r#"{{{base}, "externals": [{{"kind": "builtin", "name": "perturbed"}}]}}"#));
    for (cfg, out) in [("a.json", "a"), ("b.json", "b")] {
        assert_eq!(code(&care(&dir, &["care", "--config", cfg, "--out", out, "--quiet"])), 0);
    }
    let a = std::fs::read(dir.join("a_cv.csv")).unwrap();
    let b = std::fs::read(dir.join("b_cv.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn fit_methods_agree_for_polynomial_kernel() {
    let dir = workdir("fit");
    fixture(&dir);
    let kernel = r#""kernel": {"variant": "polynomial", "degree": 2, "shift": 1.0}"#;
    write(&dir, "r.json", &format!(r#"{{"data": "sim_train.csv", "gamma": 0.1, {kernel}}}"#));
    write(
        &dir,
        "f.json",
        &format!(r#"{{"data": "sim_train.csv", "gamma": 0.1, "method": "feature_map", {kernel}}}"#),
    );
    assert_eq!(code(&care(&dir, &["fit", "--config", "r.json", "--out", "r", "--quiet"])), 0);
    assert_eq!(code(&care(&dir, &["fit", "--config", "f.json", "--out", "f", "--quiet"])), 0);
    let r = io::read_predictions(&dir.join("r_predictions.csv")).unwrap();
    let f = io::read_predictions(&dir.join("f_predictions.csv")).unwrap();
    for (a, b) in r.iter().zip(&f) {
        assert!((a.prediction - b.prediction).abs() <= 1e-5);
    }
    assert!(matches!(io::read_json::<SavedModel>(&dir.join("f_model.json")).unwrap(), SavedModel::FeatureMap(_)));
}

#[test]
fn study_rows_and_determinism() {
    let dir = workdir("study");
    write(
        &dir,
        "study.json",
        r#"{"seed": 3, "study": {"ns": [30, 40, 50], "replications": 2},
            "gamma_grid": {"min": 1e-3, "max": 1, "count": 6}, "theta_resolution": 4, "mc_points": 100}"#,
    );
    let one = care(&dir, &["study", "--config", "study.json", "--out", "one", "--workers", "1"]);
    assert_eq!(code(&one), 0, "{}", one.stderr);
    let two = care(&dir, &["study", "--config", "study.json", "--out", "two", "--workers", "2"]);
    assert_eq!(code(&two), 0);
    let a = std::fs::read(dir.join("one_results.csv")).unwrap();
    assert_eq!(a, std::fs::read(dir.join("two_results.csv")).unwrap());
    assert_eq!(
        std::fs::read(dir.join("one_summary.csv")).unwrap(),
        std::fs::read(dir.join("two_summary.csv")).unwrap()
    );
    let rows: Vec<StudyRow> = io::read_rows(&dir.join("one_results.csv")).unwrap();
    assert_eq!(rows.len(), 3 * 2 * 4);
    assert!(rows.iter().all(|r| r.status == "ok"));

    // a different master seed changes the draws
    let other = care(&dir, &["study", "--config", "study.json", "--out", "three", "--seed", "4", "--quiet"]);
    assert_eq!(code(&other), 0);
    assert_ne!(a, std::fs::read(dir.join("three_results.csv")).unwrap());
}

#[test]
fn study_fails_when_replications_fail() {
    let dir = workdir("study-fail");
    write(
        &dir,
        "study.json",
        r#"{"study": {"ns": [30], "replications": 2}, "optimizer": {"max_iterations": 0},
            "gamma_grid": {"min": 1e-3, "max": 1, "count": 3}}"#,
    );
    let o = care(&dir, &["study", "--config", "study.json", "--out", "s", "--quiet"]);
    assert_eq!(code(&o), 5);
    let rows: Vec<StudyRow> = io::read_rows(&dir.join("s_results.csv")).unwrap();
    assert_eq!(rows.len(), 2 * 4);
    assert!(rows.iter().all(|r| r.l2_error.is_none() && r.status != "ok"));
}
