use std::path::Path;
use std::process::{Command, Output};

use sgpsurv::io::parse_dataset;

fn sgpsurv(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sgpsurv"))
        .args(args)
        .current_dir(cwd)
        .env_remove("SGPSURV_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn simulate_crossing(dir: &Path, n: &str, noisy: &str, name: &str) {
    ok(&sgpsurv(
        &[
            "simulate",
            "--generator",
            "crossing",
            "--n",
            n,
            "--noisy",
            noisy,
            "--seed",
            "4",
            "--out",
            name,
        ],
        dir,
    ));
}

#[test]
fn missing_data_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = sgpsurv(&["fit", "--seed", "1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_shapes_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    simulate_crossing(dir.path(), "150", "3", "noisy.csv");
    let ds = parse_dataset::<f64>(dir.path().join("noisy.csv")).unwrap();
    assert_eq!(ds.len(), 300);
    assert_eq!(ds.dim, 4);
    assert_eq!(
        ds.covariate_names.as_deref().unwrap(),
        ["group", "noise1", "noise2", "noise3"]
    );
    let truth = std::fs::read_to_string(dir.path().join("noisy.truth.csv")).unwrap();
    assert!(truth.starts_with("t,s0,s1\n0,1,1\n"));

    simulate_crossing(dir.path(), "25", "0", "clean.csv");
    let ds = parse_dataset::<f64>(dir.path().join("clean.csv")).unwrap();
    assert_eq!((ds.len(), ds.dim), (50, 1));
}

#[test]
fn fit_writes_artifacts_deterministically_and_predict_reads_them() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate_crossing(d, "25", "0", "data.csv");
    for out in ["run1", "run2"] {
        ok(&sgpsurv(
            &["fit", "--data", "data.csv", "--seed", "11", "--out", out],
            d,
        ));
    }
    for f in ["checkpoint.json", "manifest.json", "diagnostics.json"] {
        assert!(d.join("run1").join(f).exists(), "{f}");
    }
    let a = std::fs::read(d.join("run1/checkpoint.json")).unwrap();
    let b = std::fs::read(d.join("run2/checkpoint.json")).unwrap();
    assert!(a == b, "checkpoints differ between identical runs");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("run1/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["seed"], 11);
    assert_eq!(manifest["dataset_sha256"].as_str().unwrap().len(), 64);
    assert!(manifest["stages"].as_array().unwrap().len() >= 3);

    std::fs::write(d.join("x.csv"), "group\n1\n1\n").unwrap();
    ok(&sgpsurv(
        &[
            "predict",
            "--checkpoint",
            "run1/checkpoint.json",
            "--covariates",
            "x.csv",
            "--grid",
            "0:10:101",
            "--out",
            "curves.csv",
        ],
        d,
    ));
    let text = std::fs::read_to_string(d.join("curves.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,mean,lower,upper");
    assert_eq!(lines.len(), 1 + 2 * 101);
    assert!(lines[1].starts_with("0,1,"), "{}", lines[1]);
    assert_eq!(lines[1..102], lines[102..203]);

    let bad = sgpsurv(
        &[
            "predict",
            "--checkpoint",
            "run1/checkpoint.json",
            "--covariates",
            "x.csv",
            "--grid",
            "5:1:10",
            "--out",
            "c.csv",
        ],
        d,
    );
    assert_eq!(bad.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("grid"));

    let missing = sgpsurv(
        &[
            "predict",
            "--checkpoint",
            "none.json",
            "--covariates",
            "x.csv",
            "--grid",
            "0:1:5",
            "--out",
            "c.csv",
        ],
        d,
    );
    assert_eq!(missing.status.code(), Some(6));
}

#[test]
fn evaluate_reports_every_fold_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&sgpsurv(
        &[
            "simulate",
            "--generator",
            "ph",
            "--n",
            "137",
            "--censor-rate",
            "0.1",
            "--seed",
            "2",
            "--out",
            "ph.csv",
        ],
        d,
    ));
    let args = [
        "evaluate",
        "--data",
        "ph.csv",
        "--folds",
        "10",
        "--seed",
        "5",
        "--iters",
        "200",
        "--burn-in",
        "100",
        "--features",
        "10",
    ];
    let first = sgpsurv(&[&args[..], &["--out", "e1"]].concat(), d);
    ok(&first);
    let second = sgpsurv(&[&args[..], &["--out", "e2"]].concat(), d);
    let report = String::from_utf8_lossy(&first.stdout);
    assert_eq!(
        report.lines().filter(|l| l.starts_with("fold ")).count(),
        10
    );
    assert!(report.contains("mean C-index"));
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(
        std::fs::read(d.join("e1/evaluation.json")).unwrap(),
        std::fs::read(d.join("e2/evaluation.json")).unwrap()
    );

    let one_fold = sgpsurv(&["evaluate", "--data", "ph.csv", "--folds", "1"], d);
    assert_eq!(one_fold.status.code(), Some(2));
}

#[test]
fn config_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate_crossing(d, "10", "0", "data.csv");
    std::fs::write(
        d.join("run.toml"),
        "iters = 60\nburn_in = 20\nthin = 4\nbaseline = \"exponential\"\n",
    )
    .unwrap();
    ok(&sgpsurv(
        &[
            "fit", "--data", "data.csv", "--iters", "5000", "--config", "run.toml", "--out", "o",
        ],
        d,
    ));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("o/manifest.json")).unwrap()).unwrap();
    let chain = &manifest["config"]["chain"];
    assert_eq!(chain["n_iterations"], 60);
    assert_eq!(chain["baseline_kind"], "exponential");

    std::fs::write(d.join("typo.toml"), "iterations = 60\n").unwrap();
    let out = sgpsurv(
        &[
            "fit",
            "--data",
            "data.csv",
            "--config",
            "typo.toml",
            "--out",
            "o2",
        ],
        d,
    );
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn environment_variable_sets_default_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate_crossing(d, "10", "0", "data.csv");
    let out = Command::new(env!("CARGO_BIN_EXE_sgpsurv"))
        .args([
            "fit",
            "--data",
            "data.csv",
            "--iters",
            "40",
            "--burn-in",
            "10",
            "--thin",
            "2",
        ])
        .current_dir(d)
        .env("SGPSURV_OUT_DIR", d.join("from-env"))
        .output()
        .unwrap();
    ok(&out);
    assert!(d.join("from-env/checkpoint.json").exists());
}

#[test]
fn invalid_data_maps_to_data_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bad.csv"), "time,status,time2,x\n1,1,,0\n2,3,2,0\n").unwrap();
    let out = sgpsurv(&["fit", "--data", "bad.csv", "--out", "o"], d);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
    assert_eq!(err.trim().lines().count(), 1);
}
