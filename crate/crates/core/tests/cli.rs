use std::path::Path;
use std::process::{Command, Output};

use mclnn::cli::{resolve_run_config, RunConfig, TrainArgs};
use mclnn::data::write_feature_csv;
use mclnn::{Matrix, ModelConfig};

fn mclnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mclnn"))
        .args(args)
        .env_remove("MCLNN_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn grid_from_csv(text: &str) -> Vec<Vec<u8>> {
    text.lines()
        .map(|l| l.split(',').map(|v| v.trim().parse().unwrap()).collect())
        .collect()
}

fn grid_from_pgm(text: &str) -> Vec<Vec<u8>> {
    let mut tokens = text.split_whitespace();
    assert_eq!(tokens.next(), Some("P2"));
    let width: usize = tokens.next().unwrap().parse().unwrap();
    let height: usize = tokens.next().unwrap().parse().unwrap();
    assert_eq!(tokens.next(), Some("1"));
    let values: Vec<u8> = tokens.map(|t| t.parse().unwrap()).collect();
    assert_eq!(values.len(), width * height);
    values.chunks(width).map(<[u8]>::to_vec).collect()
}

#[test]
fn mask_table_one_spec() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mask.csv");
    let o = mclnn(&[
        "mask",
        "--features",
        "120",
        "--nodes",
        "300",
        "--bandwidth",
        "20",
        "--overlap",
        "-5",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let grid = grid_from_csv(&std::fs::read_to_string(&out).unwrap());
    assert_eq!(grid.len(), 120);
    assert_eq!(grid[0].len(), 300);
    // stride 145: bands start at 145 g for g < ceil(36000 / 145) = 249, none truncated
    let ones: usize = grid.iter().flatten().map(|&v| v as usize).sum();
    assert_eq!(ones, 249 * 20);
    assert!(stdout(&o).contains("density 0.138333"), "{}", stdout(&o));
}

#[test]
fn mask_bandwidth_above_features_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = mclnn(&[
        "mask",
        "--features",
        "4",
        "--nodes",
        "3",
        "--bandwidth",
        "5",
        "--overlap",
        "0",
        "--out",
        s(&dir.path().join("m.csv")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bandwidth"), "{}", stderr(&o));
}

#[test]
fn mask_csv_and_pgm_agree() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("m.csv");
    let pgm = dir.path().join("m.pgm");
    for (path, fmt) in [(&csv, "csv"), (&pgm, "pgm")] {
        let o = mclnn(&[
            "mask",
            "--features",
            "9",
            "--nodes",
            "8",
            "--bandwidth",
            "3",
            "--overlap",
            "-1",
            "--out",
            s(path),
            "--format",
            fmt,
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let a = grid_from_csv(&std::fs::read_to_string(&csv).unwrap());
    let b = grid_from_pgm(&std::fs::read_to_string(&pgm).unwrap());
    assert_eq!(a, b);
    // column 3 (the 4th node) sees the first two features, column 6 only one
    let col = |c: usize| (0..9).filter(|&r| a[r][c] == 1).collect::<Vec<_>>();
    assert_eq!(col(3), vec![0, 1]);
    assert_eq!(col(6), vec![0]);
}

#[test]
fn gradcheck_default_passes() {
    let o = mclnn(&["gradcheck"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let out = stdout(&o);
    assert!(out.contains("<= 1e-6"), "{out}");
    for unit in [
        "clnn layer",
        "mclnn layer",
        "dense layer",
        "prelu",
        "pool max",
        "softmax+xent",
        "model",
    ] {
        assert!(out.contains(unit), "{unit} missing from\n{out}");
    }
}

#[test]
fn gradcheck_custom_sizes_and_bad_sizes() {
    let o = mclnn(&["gradcheck", "--seed", "4", "--sizes", "5,3,2,6"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let o = mclnn(&["gradcheck", "--sizes", "5,3,2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn threads_env_fallback_is_parsed() {
    let run = |v: &str| {
        Command::new(env!("CARGO_BIN_EXE_mclnn"))
            .args(["gradcheck", "--sizes", "4,3,1,3"])
            .env("MCLNN_THREADS", v)
            .output()
            .unwrap()
    };
    assert_eq!(run("2").status.code(), Some(0));
    assert_eq!(run("lots").status.code(), Some(2));
}

const CONFIG: &str = r#"{
  "model": {"input_features": 16, "delta": true,
            "conditional_layers": [{"width": 24, "order": 2, "mask": {"bandwidth": 8, "overlap": 4}}],
            "extra_frames": 8, "dense_widths": [16], "dense_dropout": [0.0], "classes": 3, "seed": 2},
  "train": {"batch_size": 32, "max_epochs": 30, "patience": 10, "train_hop": 2, "seed": 2}
}"#;

/// Synthesises a small easy dataset and trains on it; returns (manifest, model).
fn trained(dir: &Path) -> (String, String) {
    let data = dir.join("data");
    let o = mclnn(&[
        "synth",
        "--classes",
        "3",
        "--files-per-class",
        "40",
        "--features",
        "8",
        "--frames",
        "40",
        "--noise",
        "0.5",
        "--seed",
        "5",
        "--out",
        s(&data),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let config = dir.join("config.json");
    std::fs::write(&config, CONFIG).unwrap();
    let manifest = data.join("manifest.json");
    let model = dir.join("model.bin");
    let o = mclnn(&[
        "train",
        "--manifest",
        s(&manifest),
        "--config",
        s(&config),
        "--test-fold",
        "5",
        "--val-fold",
        "4",
        "--out",
        s(&model),
    ]);
    assert!(o.status.success(), "{}\n{}", stdout(&o), stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("seed 2"), "{out}");
    assert!(out.contains("final validation accuracy"), "{out}");
    assert!(dir.join("model.bin.history.csv").exists());
    (s(&manifest).to_string(), s(&model).to_string())
}

#[test]
fn train_eval_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, model) = trained(dir.path());

    let report = dir.path().join("report.json");
    let preds = dir.path().join("preds.csv");
    let o = mclnn(&[
        "eval",
        "--manifest",
        &manifest,
        "--model",
        &model,
        "--test-fold",
        "5",
        "--report",
        s(&report),
        "--predictions",
        s(&preds),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("accuracy 1.0000"), "{}", stdout(&o));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["accuracy"], 1.0);
    assert_eq!(json["confusion"].as_array().unwrap().len(), 3);
    let csv = std::fs::read_to_string(&preds).unwrap();
    assert_eq!(csv.lines().count(), 1 + 24);
    assert!(csv.starts_with("file,label,predicted,p0,p1,p2"));

    let file = dir.path().join("data/run2/0001.csv");
    let o = mclnn(&["predict", "--model", &model, "--file", s(&file)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("class 1"), "{out}");
    let probs: Vec<f64> = out
        .lines()
        .find_map(|l| l.strip_prefix("probabilities "))
        .unwrap()
        .split(' ')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(probs.len(), 3);
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-5);

    // q = 2 * 2 + 8 = 12 frames per segment
    let short = dir.path().join("short.csv");
    write_feature_csv(&Matrix::zeros(11, 8), &short).unwrap();
    let o = mclnn(&["predict", "--model", &model, "--file", s(&short)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no segments"), "{}", stderr(&o));
}

#[test]
fn train_is_deterministic_and_rejects_bad_configs() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert!(mclnn(&[
        "synth",
        "--classes",
        "2",
        "--files-per-class",
        "10",
        "--features",
        "4",
        "--frames",
        "20",
        "--out",
        s(&data)
    ])
    .status
    .success());
    let manifest = data.join("manifest.json");
    let config = dir.path().join("c.json");
    std::fs::write(
        &config,
        r#"{"model": {"input_features": 8, "conditional_layers": [{"width": 4, "order": 1}], "extra_frames": 3,
                      "dense_widths": [4], "classes": 2},
            "train": {"max_epochs": 3}}"#,
    )
    .unwrap();
    let mut histories = Vec::new();
    for i in 0..2 {
        let model = dir.path().join(format!("m{i}.bin"));
        let o = mclnn(&[
            "train",
            "--manifest",
            s(&manifest),
            "--config",
            s(&config),
            "--test-fold",
            "1",
            "--val-fold",
            "2",
            "--out",
            s(&model),
            "--seed",
            "9",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        histories.push(std::fs::read(dir.path().join(format!("m{i}.bin.history.csv"))).unwrap());
    }
    assert_eq!(histories[0], histories[1]);
    assert_eq!(String::from_utf8_lossy(&histories[0]).lines().count(), 4);

    std::fs::write(&config, r#"{"model": {"input_features": 8}, "bogus": 1}"#).unwrap();
    let o = mclnn(&[
        "train",
        "--manifest",
        s(&manifest),
        "--config",
        s(&config),
        "--test-fold",
        "1",
        "--val-fold",
        "2",
        "--out",
        s(&dir.path().join("x.bin")),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    let o = mclnn(&[
        "train",
        "--manifest",
        "/nonexistent/manifest.json",
        "--config",
        s(&config),
        "--test-fold",
        "1",
        "--val-fold",
        "2",
        "--out",
        "x.bin",
    ]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn table_one_config_accepted_verbatim() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("table1.json");
    std::fs::write(
        &config,
        r#"{"model": {"input_features": 120, "delta": true,
              "conditional_layers": [{"width": 300, "order": 15, "mask": {"bandwidth": 20, "overlap": -5}}],
              "extra_frames": 50, "pool": "mean", "dense_widths": [100, 100], "classes": 10, "transfer": "prelu"},
            "train": {"learning_rate": 0.001}}"#,
    )
    .unwrap();
    let args = TrainArgs {
        manifest: "unused".into(),
        config: config.clone(),
        test_fold: 1,
        val_fold: 2,
        out: "unused".into(),
        history: None,
        seed: Some(3),
        batch_size: None,
        max_epochs: Some(7),
        learning_rate: None,
        beta1: None,
        beta2: None,
        epsilon: None,
        patience: None,
        checkpoint: None,
        train_hop: None,
        eval_hop: None,
        voting: None,
        pool: None,
        extra_frames: None,
    };
    let RunConfig { model, train } = resolve_run_config(&args).unwrap();
    assert_eq!(
        model,
        ModelConfig {
            seed: 3,
            ..ModelConfig::table_one(10)
        }
    );
    assert_eq!(model.segment_width().unwrap(), 80);
    assert_eq!(train.max_epochs, 7);
    assert_eq!(train.seed, 3);
}

#[test]
fn synth_is_byte_identical_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a", "b"] {
        let o = mclnn(&[
            "synth",
            "--classes",
            "2",
            "--files-per-class",
            "3",
            "--seed",
            "11",
            "--out",
            s(&dir.path().join(name)),
        ]);
        assert!(o.status.success());
    }
    for f in ["manifest.json", "run1/0000.csv", "run2/0002.csv"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}
