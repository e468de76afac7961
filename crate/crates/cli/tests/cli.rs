//! End-to-end tests of the binary: subcommand plumbing, determinism, and
//! exit codes.

use std::path::{Path, PathBuf};
use std::process::Command;

use mets_core::dataio::read_matrix;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mets"))
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("mets-cli-{}-{name}", std::process::id()));
    std::fs::remove_dir_all(&dir).ok();
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn synth(dir: &Path, n: usize, n_test: usize) {
    let status = bin()
        .args([
            "synth",
            "--n",
            &n.to_string(),
            "--N",
            &n_test.to_string(),
            "--height",
            "12",
            "--width",
            "12",
            "--blob-width",
            "1.2",
            "--seed",
            "7",
            "--out",
        ])
        .arg(dir.join("data"))
        .status()
        .unwrap();
    assert!(status.success());
}

#[test]
fn synth_writes_three_deterministic_files() {
    let dir = workdir("synth");
    synth(&dir, 60, 12);
    let names = ["training.met", "test.met", "ground_truth.met"];
    let first: Vec<Vec<u8>> = names
        .iter()
        .map(|n| std::fs::read(dir.join("data").join(n)).unwrap())
        .collect();
    let gt = read_matrix(&dir.join("data/ground_truth.met")).unwrap();
    assert_eq!(gt.shape(), (12, 2));
    // Rerun with the same flags is byte-identical.
    synth(&dir, 60, 12);
    for (name, bytes) in names.iter().zip(&first) {
        let again = std::fs::read(dir.join("data").join(name)).unwrap();
        assert_eq!(&again, bytes, "{name} changed across reruns");
    }
}

#[test]
fn extend_lambda_zero_matches_isomap() {
    let dir = workdir("extend");
    synth(&dir, 60, 12);
    for (method, extra, out) in [
        ("isomap", vec![], "iso.met"),
        ("mets", vec!["--lambda", "0"], "mets0.met"),
        ("mets", vec!["--lambda", "5", "--solver", "kronecker"], "mets5.met"),
        ("st-isomap", vec!["--epsilon", "2", "--c-ctn", "2"], "st.met"),
    ] {
        let status = bin()
            .args(["extend", "--method", method, "--k", "8", "--m", "2", "--train"])
            .arg(dir.join("data/training.met"))
            .arg("--test")
            .arg(dir.join("data/test.met"))
            .args(extra)
            .arg("--out")
            .arg(dir.join(out))
            .status()
            .unwrap();
        assert!(status.success(), "{method} failed");
    }
    let iso = read_matrix(&dir.join("iso.met")).unwrap();
    let mets0 = read_matrix(&dir.join("mets0.met")).unwrap();
    assert_eq!(iso.shape(), (2, 12));
    let rel = (&iso - &mets0).norm() / (1.0 + iso.norm());
    assert!(rel <= 1e-10, "lambda=0 deviates from isomap by {rel:e}");
    let mets5 = read_matrix(&dir.join("mets5.met")).unwrap();
    assert!((&iso - &mets5).norm() > 1e-6, "regularization had no effect");
}

#[test]
fn corrupt_is_deterministic_and_validates_shape() {
    let dir = workdir("corrupt");
    synth(&dir, 60, 12);
    let run = |out: &str| {
        bin()
            .args(["corrupt", "--kind", "gaussian", "--level", "0.2", "--seed", "3"])
            .args(["--height", "12", "--width", "12", "--input"])
            .arg(dir.join("data/test.met"))
            .arg("--out")
            .arg(dir.join(out))
            .status()
            .unwrap()
    };
    assert!(run("a.met").success());
    assert!(run("b.met").success());
    assert_eq!(
        std::fs::read(dir.join("a.met")).unwrap(),
        std::fs::read(dir.join("b.met")).unwrap()
    );
    // Wrong image shape is a usage error.
    let status = bin()
        .args(["corrupt", "--kind", "gaussian", "--level", "0.2"])
        .args(["--height", "5", "--width", "5", "--input"])
        .arg(dir.join("data/test.met"))
        .arg("--out")
        .arg(dir.join("c.met"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn eval_reports_are_byte_identical_across_reruns() {
    let dir = workdir("eval");
    let config = r#"{
        "dataset": {"synthetic": {"height": 12, "width": 12, "blob_width": 1.2,
                     "n_train": 80, "n_test": 16, "seed": 5}},
        "k": 8, "m": 2,
        "temporal": {"window": 6, "alpha": 0.0, "kind": "exponential-decay"},
        "methods": ["isomap", {"mets": {"lambda_grid": [0.0, 1.0, 100.0]}}],
        "noise": [{"kind": "salt-pepper", "levels": [0.0, 0.4]}],
        "seed": 11
    }"#;
    std::fs::write(dir.join("cfg.json"), config).unwrap();
    let run = |out: &str| {
        let status = bin()
            .args(["eval", "--config"])
            .arg(dir.join("cfg.json"))
            .arg("--out")
            .arg(dir.join(out))
            .status()
            .unwrap();
        assert!(status.success());
    };
    run("r1");
    run("r2");
    let csv1 = std::fs::read(dir.join("r1/reports.csv")).unwrap();
    let csv2 = std::fs::read(dir.join("r2/reports.csv")).unwrap();
    assert_eq!(csv1, csv2);
    let jsonl1 = std::fs::read_to_string(dir.join("r1/reports.jsonl")).unwrap();
    assert_eq!(jsonl1.lines().count(), 4);

    let text = String::from_utf8(csv1).unwrap();
    assert!(text.starts_with("method,noise_kind,noise_level,mean_error,sem,tuned_params"));
    // The zero-noise row for the plain method reports (numerically) zero error.
    let zero_row = text
        .lines()
        .find(|l| l.starts_with("isomap,salt-pepper,0,"))
        .expect("zero-noise row present");
    let mean: f64 = zero_row.split(',').nth(3).unwrap().parse().unwrap();
    assert!(mean.abs() < 1e-10, "zero-noise error {mean}");
}

#[test]
fn eval_row_cardinality_matches_grid() {
    let dir = workdir("cardinality");
    let config = r#"{
        "dataset": {"synthetic": {"height": 10, "width": 10, "blob_width": 1.0,
                     "n_train": 50, "n_test": 10, "seed": 3}},
        "k": 6, "m": 2,
        "temporal": {"window": 4},
        "methods": ["isomap", {"mets": {"lambda_grid": [0.0, 10.0]}},
                    {"st-isomap": {"epsilon_grid": [1], "c-ctn-grid": [1.0]}}],
        "noise": [{"kind": "gaussian", "levels": [0.1, 0.2, 0.3, 0.4, 0.5]}],
        "seed": 9
    }"#;
    // Unknown key spelling must be rejected, not ignored.
    std::fs::write(dir.join("bad.json"), config).unwrap();
    let status = bin()
        .args(["eval", "--config"])
        .arg(dir.join("bad.json"))
        .arg("--out")
        .arg(dir.join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    let fixed = config.replace("c-ctn-grid", "c_ctn_grid");
    std::fs::write(dir.join("cfg.json"), fixed).unwrap();
    let status = bin()
        .args(["eval", "--config"])
        .arg(dir.join("cfg.json"))
        .arg("--out")
        .arg(dir.join("out"))
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(dir.join("out/reports.csv")).unwrap();
    // Three methods by five levels plus the header.
    assert_eq!(text.lines().count(), 1 + 15);
}

#[test]
fn error_exit_codes() {
    let dir = workdir("codes");
    // Missing input file: I/O error, code 2.
    let status = bin()
        .args(["extend", "--method", "isomap", "--train"])
        .arg(dir.join("nope.met"))
        .arg("--test")
        .arg(dir.join("nope2.met"))
        .arg("--out")
        .arg(dir.join("x.met"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    // Disconnected neighbor graph: computation error, code 1.
    std::fs::write(
        dir.join("train.csv"),
        "0\n0.1\n0.2\n10\n10.1\n10.2\n",
    )
    .unwrap();
    std::fs::write(dir.join("test.csv"), "0.05\n10.05\n").unwrap();
    let status = bin()
        .args(["extend", "--method", "isomap", "--k", "1", "--m", "1", "--train"])
        .arg(dir.join("train.csv"))
        .arg("--test")
        .arg(dir.join("test.csv"))
        .arg("--out")
        .arg(dir.join("x.met"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));

    // Clap usage error, code 2.
    let status = bin().args(["extend", "--method", "bogus"]).status().unwrap();
    assert_eq!(status.code(), Some(2));
}
