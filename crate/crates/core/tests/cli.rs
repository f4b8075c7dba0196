use std::path::Path;
use std::process::{Command, Output};

fn geoprior(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geoprior"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

const CONFIG: &str = r#"{
    "seed": 3,
    "model": {"hidden_dim": 16, "num_residual_blocks": 1},
    "train": {"epochs": 2, "batch_size": 64, "learning_rate": 0.002, "checkpoint_every": 1},
    "synth": {"n_species": 6, "grid_rows": 18, "grid_cols": 36, "sigma_min_deg": 10.0,
              "sigma_max_deg": 20.0, "unmapped_fraction": 0.34, "obs_per_species": 30,
              "n_eval_items": 100, "confusion_pairs": 1},
    "map_rows": 9,
    "map_cols": 18,
    "data_dir": "data"
}"#;

fn prepared() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.json"), CONFIG).unwrap();
    let out = geoprior(&["synth", "--config", "run.json"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = geoprior(
        &["train", "--config", "run.json", "--out", "model.bin"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    dir
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(geoprior(&[], dir.path()).status.code(), Some(2));
    assert_eq!(geoprior(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(
        geoprior(&["train", "--epochs", "ten"], dir.path()).status.code(),
        Some(2)
    );
    assert_eq!(
        geoprior(&["sweep", "--param", "k"], dir.path()).status.code(),
        Some(2)
    );
    assert_eq!(
        geoprior(&["sweep", "--param", "gamma", "--values", "1"], dir.path())
            .status
            .code(),
        Some(2)
    );
    assert_eq!(geoprior(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn runtime_errors_exit_1_and_name_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let out = geoprior(&["eval-range", "--model", "missing.bin"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("loading model failed") && err.contains("missing.bin"),
        "{err}"
    );

    std::fs::write(dir.path().join("bad.json"), "{ not json").unwrap();
    let out = geoprior(&["synth", "--config", "bad.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("loading config failed"));
}

#[test]
fn invalid_fusion_settings_are_rejected() {
    let dir = prepared();
    let out = geoprior(&["eval-geoprior", "--config", "run.json", "--k", "0"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("k_default"));
}

#[test]
fn full_pipeline() {
    let dir = prepared();
    let p = dir.path();
    for f in [
        "observations.csv",
        "geo_species.json",
        "vision_species.json",
        "taxonomy.json",
        "eval_items.csv",
        "vision_probs.f32m",
        "ranges.bin",
        "world.json",
    ] {
        assert!(p.join("data").join(f).exists(), "missing {f}");
    }
    assert!(p.join("model.bin").exists());
    assert!(p.join("model.epoch1.bin").exists() && p.join("model.epoch2.bin").exists());

    let out = geoprior(
        &[
            "eval-geoprior",
            "--config",
            "run.json",
            "--model",
            "model.bin",
            "--k",
            "0.5",
            "--out",
            "report.json",
        ],
        p,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(p.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["num_items"], 100);
    assert_eq!(report["config_echo"]["fusion"]["k_default"], 0.5);
    assert!(report["map_scores"]["expert"].as_f64().unwrap() > 0.0);

    let out = geoprior(&["eval-range", "--config", "run.json"], p);
    assert!(out.status.success());
    let range: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(range["evaluated"], 4);

    let out = geoprior(
        &[
            "sweep",
            "--config",
            "run.json",
            "--model",
            "model.bin",
            "--param",
            "k",
            "--values",
            "1,0.1",
            "--out",
            "sweep.json",
        ],
        p,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.lines().count() >= 3, "{table}");
    let rows: Vec<serde_json::Value> =
        serde_json::from_slice(&std::fs::read(p.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1]["value"], 0.1);

    let out = geoprior(
        &[
            "sweep",
            "--config",
            "run.json",
            "--param",
            "epochs",
            "--values",
            "1,2",
            "--out",
            "epochs.json",
        ],
        p,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let names: Vec<String> =
        serde_json::from_slice(&std::fs::read(p.join("data/geo_species.json")).unwrap()).unwrap();
    let out = geoprior(
        &[
            "export-map",
            "--config",
            "run.json",
            "--species",
            &names[0],
            "--out",
            "map.png",
        ],
        p,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let png = std::fs::read(p.join("map.png")).unwrap();
    assert_eq!(&png[1..4], b"PNG");
    let side: serde_json::Value =
        serde_json::from_slice(&std::fs::read(p.join("map.json")).unwrap()).unwrap();
    assert_eq!(side["n_rows"], 9);
    assert_eq!(side["species"], names[0].as_str());

    let out = geoprior(&["export-map", "--config", "run.json", "--species", "nope"], p);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn epoch_flag_overrides_config() {
    let dir = prepared();
    let out = geoprior(
        &[
            "train", "--config", "run.json", "--epochs", "3", "--out", "m3.bin",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("epoch")).count(), 3);
    assert!(dir.path().join("m3.epoch3.bin").exists());
}

#[test]
fn reports_echo_the_training_settings() {
    let dir = prepared();
    let p = dir.path();
    let out = geoprior(
        &[
            "train", "--config", "run.json", "--epochs", "1", "--delta", "0.001", "--out", "m/d.bin",
        ],
        p,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let saved: serde_json::Value =
        serde_json::from_slice(&std::fs::read(p.join("m/d.config.json")).unwrap()).unwrap();
    assert_eq!(saved["fusion"]["delta"], 0.001);
    assert_eq!(saved["train"]["epochs"], 1);

    let out = geoprior(
        &[
            "eval-geoprior",
            "--config",
            "run.json",
            "--model",
            "m/d.bin",
            "--delta",
            "0.001",
        ],
        p,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["config_echo"]["train"]["epochs"], 1);
    assert_eq!(report["config_echo"]["fusion"]["delta"], 0.001);
}

#[test]
fn identical_runs_give_identical_reports() {
    let a = prepared();
    let b = prepared();
    for d in [&a, &b] {
        let out = geoprior(
            &["eval-geoprior", "--config", "run.json", "--out", "r.json"],
            d.path(),
        );
        assert!(out.status.success());
    }
    for f in [
        "r.json",
        "model.bin",
        "data/eval_items.csv",
        "data/vision_probs.f32m",
    ] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}
