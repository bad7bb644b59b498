use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn ctrboost(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctrboost"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = ctrboost(args);
    assert!(
        out.status.success(),
        "ctrboost {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails(args: &[&str]) -> String {
    let out = ctrboost(args);
    assert!(!out.status.success(), "ctrboost {args:?} should fail");
    String::from_utf8(out.stderr).unwrap()
}

/// Deterministic click data: the label depends on the ad and on `x`.
fn write_csv(dir: &Path) -> PathBuf {
    let mut state: u64 = 42;
    let mut next = || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut text = String::from("ad,site,x,click\n");
    for i in 0..1500 {
        let ad = (i * 7) % 13;
        let site = i % 5;
        let x = next();
        let logit = if ad < 5 { 1.0 } else { -1.0 } + 2.0 * (x - 0.5);
        let p = 1.0 / (1.0 + (-logit).exp());
        let click = u8::from(next() < p);
        let x = if i % 50 == 0 { String::new() } else { format!("{x:.4}") };
        text.push_str(&format!("a{ad},s{site},{x},{click}\n"));
    }
    let path = dir.join("clicks.csv");
    fs::write(&path, text).unwrap();
    path
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("spec.toml");
    fs::write(&path, body).unwrap();
    path
}

const SMALL_GBDT: &str = "[gbdt]\nn_trees = 30\nmax_depth = 3\nearly_stopping_rounds = 5\n";

#[test]
fn train_predict_evaluate() {
    let dir = TempDir::new().unwrap();
    let csv = write_csv(dir.path());
    let csv = csv.to_str().unwrap();
    let config = write_config(
        dir.path(),
        &format!("version = 1\n[data]\nsource = \"csv\"\npath = \"clicks.csv\"\ntarget = \"click\"\n{SMALL_GBDT}"),
    );
    let model = dir.path().join("model.ctrb");
    let model = model.to_str().unwrap();
    ok(&[
        "train",
        "--config",
        config.to_str().unwrap(),
        "--out",
        model,
        "--threads",
        "1",
    ]);

    let preds = dir.path().join("preds.csv");
    let preds = preds.to_str().unwrap();
    ok(&[
        "predict", "--data", csv, "--target", "click", "--model", model, "--out", preds,
    ]);
    let text = fs::read_to_string(preds).unwrap();
    assert!(text.starts_with("row_id,probability\n"));
    assert_eq!(text.lines().count(), 1501);

    let from_model = ok(&["evaluate", "--data", csv, "--target", "click", "--model", model]);
    let from_file = ok(&["evaluate", "--data", csv, "--target", "click", "--predictions", preds]);
    let a: serde_json::Value = serde_json::from_str(&from_model).unwrap();
    let b: serde_json::Value = serde_json::from_str(&from_file).unwrap();
    assert_eq!(a, b);
    assert!(a["auroc"].as_f64().unwrap() > 0.7);

    let stdout = ok(&["predict", "--data", csv, "--target", "click", "--model", model]);
    assert_eq!(stdout, text);

    let csv_eval = ok(&[
        "evaluate", "--data", csv, "--target", "click", "--model", model, "--format", "csv",
    ]);
    assert!(csv_eval.starts_with("n_rows,logloss,auroc\n1500,"));
}

#[test]
fn experiment_report_round_trip() {
    let dir = TempDir::new().unwrap();
    let csv = write_csv(dir.path());
    let csv = csv.to_str().unwrap();
    let config = write_config(
        dir.path(),
        &format!("version = 1\n[data]\nsource = \"csv\"\npath = \"x\"\n{SMALL_GBDT}"),
    );
    let report = dir.path().join("out/report.json");
    let report = report.to_str().unwrap();
    ok(&[
        "experiment",
        "--config",
        config.to_str().unwrap(),
        "--data",
        csv,
        "--target",
        "click",
        "--repeats",
        "3",
        "--seed",
        "5",
        "--encoder",
        "kfold_target",
        "--out",
        report,
    ]);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(json["kind"], "experiment");
    assert_eq!(json["seeds"], serde_json::json!([5, 6, 7]));
    assert_eq!(json["spec"]["encoder"]["mode"], "kfold_target");
    assert!(json["test_auroc"]["half_width"].as_f64().unwrap() > 0.0);

    let table = ok(&["report", report, "--format", "csv"]);
    assert!(table.starts_with("repeat,seed,n_train,n_valid,n_test,n_trees,"));
    assert_eq!(table.lines().count(), 4);
    let again = ok(&["report", report]);
    assert_eq!(again, fs::read_to_string(report).unwrap());
}

#[test]
fn ablate_cost_curve_and_staleness() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        &format!("version = 1\nn_repeats = 2\n[data]\nsource = \"synthetic\"\ngenerator = \"ctr_clone\"\nn_rows = 2000\nn_categorical = 3\n{SMALL_GBDT}"),
    );
    let config = config.to_str().unwrap();
    let table = ok(&[
        "ablate",
        "--config",
        config,
        "--encoder",
        "label,native_passthrough",
        "--format",
        "csv",
    ]);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "mode,logloss_mean,logloss_hw,auroc_mean,auroc_hw");
    assert!(lines[1].starts_with("label,"));
    assert!(lines[2].starts_with("native_passthrough,"));

    let curve = ok(&[
        "cost-curve",
        "--config",
        config,
        "--checkpoint-every",
        "5",
        "--rate-usd-per-hour",
        "2.5",
    ]);
    let curve: serde_json::Value = serde_json::from_str(&curve).unwrap();
    assert_eq!(curve["kind"], "cost_curve");
    assert_eq!(curve["rate_usd_per_hour"], 2.5);
    let points = curve["points"].as_array().unwrap();
    assert_eq!(points[0]["iteration"], 0);
    assert_eq!(points.last().unwrap()["is_final"], true);

    let stream = write_config(
        dir.path(),
        &format!("version = 1\n[data]\nsource = \"synthetic\"\ngenerator = \"drift_stream\"\nn_rows = 3000\nseed = 1\n{SMALL_GBDT}"),
    );
    let stale = ok(&[
        "staleness",
        "--config",
        stream.to_str().unwrap(),
        "--windows",
        "5",
        "--warmup",
        "2",
        "--policy",
        "never",
        "--format",
        "csv",
    ]);
    let lines: Vec<&str> = stale.lines().collect();
    assert_eq!(lines[0], "policy,window,t_start,t_end,n_train_rows,logloss,auroc");
    assert_eq!(lines.len(), 4);
    assert!(lines[1..].iter().all(|l| l.starts_with("never,")));
}

#[test]
fn errors_are_reported() {
    let dir = TempDir::new().unwrap();
    assert!(fails(&["experiment"]).contains("--config or --data"));
    let csv = write_csv(dir.path());
    let csv = csv.to_str().unwrap();

    let bogus = dir.path().join("bogus.ctrb");
    fs::write(&bogus, b"not a model at all").unwrap();
    let err = fails(&[
        "predict",
        "--data",
        csv,
        "--target",
        "click",
        "--model",
        bogus.to_str().unwrap(),
    ]);
    assert!(err.contains("loading model"), "{err}");

    let config = write_config(
        dir.path(),
        "version = 2\n[data]\nsource = \"csv\"\npath = \"clicks.csv\"\n",
    );
    assert!(fails(&["experiment", "--config", config.to_str().unwrap()]).contains("version"));

    let err = fails(&["ablate", "--data", csv, "--encoder", "onehot"]);
    assert!(err.contains("onehot"), "{err}");
    fails(&["experiment", "--data", csv, "--threads", "0"]);
}
