use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use effseg::io::{decode_weights, encode_weights, load_weights, read_image, read_mask};
use effseg::net::{CoordMode, UNetConfig};
use tempfile::TempDir;

const TINY: &str = r#"{
  "phantom": {"preset": "A", "count": 12},
  "unet": {"depth": 1, "base_channels": 2},
  "train": {"epochs": 2, "steps_per_epoch": 2, "batch_size": 2},
  "eval": {"folds": 3}
}"#;

fn effseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_effseg")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = effseg(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn csv_rows(p: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(p)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

/// Tiny dataset generated once per test.
fn tiny_dataset(tmp: &TempDir) -> (PathBuf, PathBuf) {
    let cfg = write_config(tmp.path(), "tiny.json", TINY);
    let data = tmp.path().join("data");
    ok(&["phantom", "--config", s(&cfg), "--seed", "3", "--out", s(&data)]);
    (cfg, data)
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for entry in walk(dir) {
        out.push((entry.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&entry).unwrap()));
    }
    out.sort();
    out
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

#[test]
fn phantom_presets_have_their_sizes() {
    let tmp = TempDir::new().unwrap();
    for (preset, n, probe) in [("A", 51, "linear"), ("B", 92, "curved")] {
        let cfg = write_config(tmp.path(), "p.json", &format!(r#"{{"phantom": {{"preset": "{preset}"}}}}"#));
        let out_dir = tmp.path().join(preset);
        let out = ok(&["phantom", "--config", s(&cfg), "--out", s(&out_dir)]);
        assert!(String::from_utf8_lossy(&out.stdout).contains(&format!("wrote {n} samples")));
        assert_eq!(std::fs::read_dir(out_dir.join("images")).unwrap().count(), n);
        assert_eq!(std::fs::read_dir(out_dir.join("masks")).unwrap().count(), n);
        let meta = csv_rows(&out_dir.join("meta.csv"));
        assert_eq!(meta.len(), n + 1);
        assert_eq!(
            meta[0],
            [
                "id",
                "probe",
                "apex_row",
                "apex_col",
                "cross_top_row",
                "cross_top_col",
                "cross_bottom_row",
                "cross_bottom_col"
            ]
        );
        for row in &meta[1..] {
            assert_eq!(row[1], probe);
            // curved frames record the apex, linear ones leave it empty
            assert_eq!(row[2].is_empty(), probe == "linear");
        }
    }
}

#[test]
fn phantom_rerun_is_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "tiny.json", TINY);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["phantom", "--config", s(&cfg), "--seed", "9", "--out", s(&a)]);
    ok(&["phantom", "--config", s(&cfg), "--seed", "9", "--out", s(&b)]);
    assert_eq!(files(&a), files(&b));
    let c = tmp.path().join("c");
    ok(&["phantom", "--config", s(&cfg), "--seed", "10", "--out", s(&c)]);
    assert_ne!(files(&a), files(&c));
}

#[test]
fn resolved_config_materializes_every_field() {
    let tmp = TempDir::new().unwrap();
    let (_, data) = tiny_dataset(&tmp);
    let text = std::fs::read_to_string(data.join("resolved_config.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["seed"], 3);
    assert_eq!(v["train"]["seed"], 3);
    assert_eq!(v["phantom"]["count"], 12);
    assert_eq!(v["phantom"]["spec"]["rows"], 128);
    assert_eq!(v["preprocess"]["divisor"], 2);
    assert_eq!(v["unet"]["max_channels"], 256);
}

#[test]
fn preprocess_logs_every_image_and_crops_masks_alike() {
    let tmp = TempDir::new().unwrap();
    let (cfg, data) = tiny_dataset(&tmp);
    let clean = tmp.path().join("clean");
    ok(&["preprocess", s(&data), "--config", s(&cfg), "--out", s(&clean)]);
    let log = csv_rows(&clean.join("preproc_log.csv"));
    assert_eq!(log.len(), 13);
    let col = |name: &str| log[0].iter().position(|h| h == name).unwrap();
    for row in &log[1..] {
        let id = &row[0];
        assert_eq!(row[col("detections")], "2", "{id}");
        let before = read_mask(&data.join(format!("masks/{id}.pgm"))).unwrap();
        let after = read_mask(&clean.join(format!("masks/{id}.pgm"))).unwrap();
        let img = read_image(&clean.join(format!("images/{id}.pgm"))).unwrap();
        assert_eq!(img.dims(), after.dims());
        let get = |n: &str| row[col(n)].parse::<usize>().unwrap();
        let expect = before
            .crop(get("crop_row0"), get("crop_col0"), get("crop_rows"), get("crop_cols"))
            .pad(get("pad_top"), get("pad_bottom"), get("pad_left"), get("pad_right"));
        assert_eq!(after, expect, "{id}");
        assert_eq!(after.rows() % 2, 0);
    }
}

#[test]
fn preprocess_without_crosses_only_crops() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "nocross.json",
        r#"{"phantom": {"preset": "A", "count": 4, "spec": {"draw_crosses": false}}}"#,
    );
    let data = tmp.path().join("data");
    let clean = tmp.path().join("clean");
    ok(&["phantom", "--config", s(&cfg), "--out", s(&data)]);
    ok(&["preprocess", s(&data), "--config", s(&cfg), "--out", s(&clean)]);
    let log = csv_rows(&clean.join("preproc_log.csv"));
    for row in &log[1..] {
        let id = &row[0];
        assert_eq!(row[1], "0");
        let a = read_image(&data.join(format!("images/{id}.pgm"))).unwrap();
        let b = read_image(&clean.join(format!("images/{id}.pgm"))).unwrap();
        // linear preset: full height, 8 blank columns dropped on each side
        assert_eq!(b.dims(), (128, 112));
        assert_eq!(b, a.crop(0, 8, 128, 112));
    }
}

#[test]
fn preprocess_continues_past_a_bad_file() {
    let tmp = TempDir::new().unwrap();
    let (cfg, data) = tiny_dataset(&tmp);
    std::fs::write(data.join("images/0003.pgm"), b"P5\n128 128\n255\n\x00\x01").unwrap();
    let clean = tmp.path().join("clean");
    let out = effseg(&["preprocess", s(&data), "--config", s(&cfg), "--out", s(&clean)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("0003"));
    assert_eq!(csv_rows(&clean.join("preproc_log.csv")).len(), 12);
    assert_eq!(std::fs::read_dir(clean.join("images")).unwrap().count(), 11);
}

#[test]
fn train_writes_weights_and_log() {
    let tmp = TempDir::new().unwrap();
    let (cfg, data) = tiny_dataset(&tmp);
    let unet = UNetConfig {
        depth: 1,
        base_channels: 2,
        ..Default::default()
    };
    for (flag, channels) in [(false, 1), (true, 3)] {
        let out_dir = tmp.path().join(format!("train_{flag}"));
        let mut args = vec!["train", s(&data), "--fold", "1", "--config", s(&cfg), "--out", s(&out_dir)];
        if flag {
            args.push("--coordconv");
        }
        ok(&args);
        assert_eq!(csv_rows(&out_dir.join("train_log.csv")).len(), 1 + 2);
        let bytes = std::fs::read(out_dir.join("weights.efsg")).unwrap();
        let tensors = decode_weights(&bytes).unwrap();
        let first = tensors.iter().find(|t| t.0 == "enc0.a.weight").unwrap();
        assert_eq!(first.1[1], channels);
        let mode = if flag { CoordMode::Cartesian } else { CoordMode::None };
        let model = load_weights(&out_dir.join("weights.efsg"), &unet.clone().with_coords(mode)).unwrap();
        assert_eq!(encode_weights(&model), bytes);
    }
}

#[test]
fn train_rejects_fold_out_of_range() {
    let tmp = TempDir::new().unwrap();
    let (cfg, data) = tiny_dataset(&tmp);
    let out = effseg(&["train", s(&data), "--fold", "3", "--config", s(&cfg), "--out", s(tmp.path())]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("fold 3"));
}

#[test]
fn diverging_training_exits_with_numeric_code() {
    let tmp = TempDir::new().unwrap();
    let (_, data) = tiny_dataset(&tmp);
    let cfg = write_config(
        tmp.path(),
        "nan.json",
        r#"{"phantom": {"preset": "A", "count": 12},
            "unet": {"depth": 1, "base_channels": 2},
            "train": {"epochs": 3, "steps_per_epoch": 4, "batch_size": 2, "lr0": 1e30, "grad_clip": null},
            "eval": {"folds": 3}}"#,
    );
    let out = effseg(&["train", s(&data), "--fold", "0", "--config", s(&cfg), "--out", s(tmp.path())]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn usage_errors_exit_with_one() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&effseg(&["frobnicate"])), 1);
    assert_eq!(code(&effseg(&["train", "--fold", "x", "d"])), 1);
    let bad = write_config(tmp.path(), "bad.json", r#"{"epochs": 3}"#);
    assert_eq!(code(&effseg(&["phantom", "--config", s(&bad), "--out", s(tmp.path())])), 1);
    let missing = tmp.path().join("nope.json");
    assert_eq!(code(&effseg(&["phantom", "--config", s(&missing), "--out", s(tmp.path())])), 1);
    assert_eq!(code(&effseg(&["--help"])), 0);
}

#[test]
fn cv_then_report_round_trip() {
    let tmp = TempDir::new().unwrap();
    let (cfg, data) = tiny_dataset(&tmp);
    let run = |name: &str| {
        let dir = tmp.path().join(name);
        ok(&["cv", s(&data), "--config", s(&cfg), "--out", s(&dir)]);
        dir
    };
    let first = run("cv1");
    let second = run("cv2");
    assert_eq!(files(&first), files(&second), "cv is not deterministic");

    let metrics = csv_rows(&first.join("metrics.csv"));
    assert_eq!(
        metrics[0],
        ["id", "variant", "fold", "dsc", "abs_area_error_pct", "area_bias_pct"]
    );
    assert_eq!(metrics.len(), 1 + 2 * 12);
    let report = std::fs::read_to_string(first.join("report.txt")).unwrap();
    let pattern = |line: &str| line.matches(" (").count() >= 2 && line.contains(", ");
    for metric in ["DSC", "Abs. area error %", "Area bias %"] {
        let line = report.lines().find(|l| l.starts_with(metric)).unwrap();
        assert!(pattern(line), "{line}");
    }
    assert!(report.contains("Wilcoxon"));
    for variant in ["baseline", "coordconv"] {
        let hist = csv_rows(&first.join(format!("hist_{variant}.csv")));
        assert_eq!(hist[0], ["bin_left", "bin_right", "count"]);
        let total: usize = hist[1..].iter().map(|r| r[2].parse::<usize>().unwrap()).sum();
        assert_eq!(total, 12);
    }

    // re-render from the stored records
    let again = tmp.path().join("again");
    ok(&["report", s(&first.join("metrics.csv")), "--config", s(&cfg), "--out", s(&again)]);
    assert_eq!(
        std::fs::read(first.join("report.txt")).unwrap(),
        std::fs::read(again.join("report.txt")).unwrap()
    );

    // split by variant and merge back
    let text = std::fs::read_to_string(first.join("metrics.csv")).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    let (base, coord): (Vec<&str>, Vec<&str>) = lines.partition(|l| l.contains(",baseline,"));
    let bp = write_config(tmp.path(), "base.csv", &format!("{header}\n{}\n", base.join("\n")));
    let cp = write_config(tmp.path(), "coord.csv", &format!("{header}\n{}\n", coord.join("\n")));
    let merged = tmp.path().join("merged");
    let inter = first.join("interobserver.csv");
    ok(&["report", s(&bp), s(&cp), "--interobserver", s(&inter), "--config", s(&cfg), "--out", s(&merged)]);
    let merged_report = std::fs::read_to_string(merged.join("report.txt")).unwrap();
    assert_eq!(merged_report.matches("Wilcoxon").count(), 1);
    assert_eq!(merged_report, report);
}

#[test]
fn report_rejects_empty_and_malformed_tables() {
    let tmp = TempDir::new().unwrap();
    let empty = write_config(tmp.path(), "empty.csv", "id,variant,fold,dsc,abs_area_error_pct,area_bias_pct\n");
    let out = effseg(&["report", s(&empty), "--out", s(tmp.path())]);
    assert_eq!(code(&out), 2);
    let missing = write_config(tmp.path(), "missing.csv", "id,variant,fold,abs_area_error_pct,area_bias_pct\n0000,baseline,0,1.0,1.0\n");
    let out = effseg(&["report", s(&missing), "--out", s(tmp.path())]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("dsc"), "{}", String::from_utf8_lossy(&out.stderr));
}
