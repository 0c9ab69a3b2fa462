use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sinco::codec::write_segmenter;
use sinco::imageio::{save_image, synth_phantom, ImagePlane};
use sinco::nets::{SegNet, SegNetConfig};
use sinco_cli::exit;

fn sinco(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sinco")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes `img_K.pgm` / `mask_K.pgm` phantoms and a small untrained checkpoint.
fn fixture(dir: &Path, n: u64, side: usize) -> PathBuf {
    for k in 0..n {
        let (x, m) = synth_phantom(k, side, side).unwrap();
        save_image(&x, dir.join(format!("img_{k}.pgm"))).unwrap();
        let mask = ImagePlane::new(side, side, m.values().to_vec()).unwrap();
        save_image(&mask, dir.join(format!("mask_{k}.pgm"))).unwrap();
    }
    let g = SegNet::init(
        SegNetConfig {
            levels: 1,
            base_channels: 2,
        },
        3,
    )
    .unwrap();
    let ckpt = dir.join("seg.ckpt");
    std::fs::write(&ckpt, write_segmenter(&g).unwrap()).unwrap();
    ckpt
}

#[test]
fn train_seg_synthetic_writes_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.ckpt");
    let o = sinco(&[
        "train-seg", "--synthetic", "4", "--size", "32", "--epochs", "1", "--batch", "2",
        "--base-channels", "2", "-o", s(&out),
    ]);
    assert_eq!(code(&o), exit::OK, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::read(&out).unwrap().starts_with(b"SNCO"));
    assert!(dir.path().join("g.ckpt.manifest.json").exists());
}

#[test]
fn train_seg_rejects_unpaired_directory() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path(), 2, 32);
    std::fs::remove_file(dir.path().join("mask_1.pgm")).unwrap();
    let o = sinco(&["train-seg", "--data-dir", s(dir.path()), "-o", s(&dir.path().join("g.ckpt"))]);
    assert_eq!(code(&o), exit::USAGE);
}

#[test]
fn compress_with_lambda_needs_mask_and_segmenter() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path(), 1, 32);
    let o = sinco(&["compress", "-i", s(&dir.path().join("img_0.pgm")), "--epochs", "1"]);
    assert_eq!(code(&o), exit::USAGE);
}

#[test]
fn bad_inputs_map_to_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let missing = sinco(&["decompress", "-i", s(&dir.path().join("nope.sinco")), "-o", "x.pgm"]);
    assert_eq!(code(&missing), exit::DATA);
    let junk = dir.path().join("junk.pgm");
    std::fs::write(&junk, b"P5\n4 4\n255\nab").unwrap();
    let o = sinco(&["compress", "-i", s(&junk), "--lambda", "0", "--epochs", "1"]);
    assert_eq!(code(&o), exit::DATA);
}

#[test]
fn infeasible_budget_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path(), 1, 32);
    let o = sinco(&["compress", "-i", s(&dir.path().join("img_0.pgm")), "--lambda", "0", "--bpp", "0.1"]);
    assert_eq!(code(&o), exit::USAGE);
}

#[test]
fn compress_decompress_evaluate_round() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = fixture(dir.path(), 2, 32);
    let out = dir.path().join("out");
    std::fs::create_dir(&out).unwrap();
    for k in 0..2 {
        let o = sinco(&[
            "compress", "-i", s(&dir.path().join(format!("img_{k}.pgm"))), "-o",
            s(&out.join(format!("img_{k}.sinco"))), "--bpp", "4", "--epochs", "20",
            "--mask", s(&dir.path().join(format!("mask_{k}.pgm"))), "--seg", s(&ckpt),
        ]);
        assert_eq!(code(&o), exit::OK, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let container = out.join("img_0.sinco");
    let bytes = std::fs::read(&container).unwrap();
    let weights = (bytes.len() - 22) / 2;
    assert!(bytes.len() % 2 == 0 && weights <= 256);

    let png = out.join("r.pgm");
    let o = sinco(&["decompress", "-i", s(&container), "-o", s(&png), "--out16", s(&out.join("r16.pgm"))]);
    assert_eq!(code(&o), exit::OK);
    assert!(std::fs::read(&png).unwrap().starts_with(b"P5\n32 32\n255\n"));
    assert!(std::fs::read(out.join("r16.pgm")).unwrap().starts_with(b"P5\n32 32\n65535\n"));

    let o = sinco(&[
        "evaluate", "--original", s(&dir.path().join("img_0.pgm")), "--compressed", s(&container),
    ]);
    assert_eq!(code(&o), exit::OK);
    let row: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(row["bpp"], weights as f64 * 16.0 / 1024.0);
    assert!(row["dice"].is_null());

    let report = dir.path().join("eval.jsonl");
    let o = sinco(&[
        "evaluate", "--original-dir", s(dir.path()), "--compressed-dir", s(&out), "--mask-dir",
        s(dir.path()), "--seg", s(&ckpt), "-o", s(&report),
    ]);
    assert_eq!(code(&o), exit::OK, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&report).unwrap();
    let rows: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 3);
    let mean = &rows[2];
    assert_eq!(mean["image"], "mean");
    let avg = (rows[0]["psnr_db"].as_f64().unwrap() + rows[1]["psnr_db"].as_f64().unwrap()) / 2.0;
    assert!((mean["psnr_db"].as_f64().unwrap() - avg).abs() < 1e-9);
    assert!(mean["dice"].is_number());
}

#[test]
fn rerun_reproduces_the_artifact() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path(), 1, 32);
    let target = dir.path().join("a.sinco");
    let o = sinco(&[
        "compress", "-i", s(&dir.path().join("img_0.pgm")), "-o", s(&target), "--lambda", "0",
        "--arch", "pemlp", "--frequencies", "2", "--bpp", "8", "--epochs", "30", "--seed", "5",
    ]);
    assert_eq!(code(&o), exit::OK, "{}", String::from_utf8_lossy(&o.stderr));
    let first = std::fs::read(&target).unwrap();
    std::fs::remove_file(&target).unwrap();

    let manifest = dir.path().join("a.sinco.manifest.json");
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(&manifest).unwrap()).unwrap();
    assert_eq!(m["arch"], "pemlp");
    assert_eq!(m["seed"], 5);
    let o = sinco(&["rerun", s(&manifest)]);
    assert_eq!(code(&o), exit::OK);
    assert_eq!(std::fs::read(&target).unwrap(), first);
}

#[test]
fn sweep_tabulates_arms_and_honours_thread_cap() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = fixture(dir.path(), 2, 32);
    let csv = dir.path().join("sweep.csv");
    let args = [
        "sweep", "--data-dir", s(dir.path()), "--seg", s(&ckpt), "--lambdas", "0,0.5", "--bpp", "8",
        "--epochs", "5", "-o", s(&csv),
    ];
    let o = Command::new(env!("CARGO_BIN_EXE_sinco"))
        .args(args)
        .env("SINCO_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(code(&o), exit::OK, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("image,lambda,arch,"));
    assert_eq!(lines.len(), 1 + 4 + 2);
    assert!(lines[5].starts_with("mean,0,") && lines[6].starts_with("mean,0.5,"));

    let o = Command::new(env!("CARGO_BIN_EXE_sinco"))
        .args(args)
        .env("SINCO_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(code(&o), exit::USAGE);
}
