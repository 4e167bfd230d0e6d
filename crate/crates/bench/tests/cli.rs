use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qubit_readout::FormatError;
use readout_bench::formats::{read_iq, read_traj};
use readout_bench::report::Table;
use readout_bench::BenchError;

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_readout-bench"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("run readout-bench")
}

fn ok(args: &[&str]) -> String {
    let out = bench(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_writes_full_sized_datasets_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(&["generate", "--out-dir", s(out), "--tm", "800", "--shots-per-state", "8000", "--no-raw"]);
    }
    let traj = read_traj(&a.join("traj_tm800.qrd")).unwrap();
    assert_eq!(traj.trajectories.len(), 16_000);
    assert_eq!(traj.meta.dt_ns, 16.0);
    assert!(traj.trajectories.iter().all(|t| t.len() == 50));
    for name in ["traj_tm800.qrd", "iq_tm800.qrd"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name} differs");
    }
    let (_, points) = read_iq(&a.join("iq_tm800.qrd")).unwrap();
    assert_eq!(points.len(), 16_000);
    assert!(!a.join("raw.qrd").exists());
}

#[test]
fn generate_with_raw_and_several_windows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    ok(&["generate", "--out-dir", s(out), "--tm", "800,2400", "--shots-per-state", "20", "--states", "3"]);
    let traj = read_traj(&out.join("traj_tm2400.qrd")).unwrap();
    assert_eq!(traj.trajectories.len(), 60);
    assert_eq!(traj.trajectories[0].len(), 150);
    let (meta, raw) = readout_bench::formats::read_raw(&out.join("raw.qrd")).unwrap();
    assert_eq!(raw.len(), 60);
    assert_eq!(meta.tm_ns, 2400.0);
    assert!(raw.iter().all(|r| r.samples.len() == 2400));
    let text = ok(&["inspect", s(&out.join("raw.qrd"))]);
    assert!(text.contains("QRD-RAW"), "{text}");
}

fn expect_format_error(path: &Path) -> FormatError {
    match read_traj(path) {
        Err(BenchError::File { source, .. }) => source,
        other => panic!("expected a format error, got {other:?}"),
    }
}

#[test]
fn damaged_files_give_distinct_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    ok(&["generate", "--out-dir", s(out), "--tm", "800", "--shots-per-state", "10", "--no-raw"]);
    let good = fs::read(out.join("traj_tm800.qrd")).unwrap();
    let bad = out.join("bad.qrd");

    fs::write(&bad, &good[..good.len() - 13]).unwrap();
    assert!(matches!(expect_format_error(&bad), FormatError::Truncated(_)));

    let mut flipped = good.clone();
    let last = flipped.len() - 3;
    flipped[last] ^= 0x40;
    fs::write(&bad, &flipped).unwrap();
    assert!(matches!(expect_format_error(&bad), FormatError::ChecksumMismatch { .. }));

    let text = String::from_utf8_lossy(&good[..40]).to_string();
    let first_line = text.lines().next().unwrap().to_string();
    let bumped = first_line.replace(" 1", " 9");
    let mut v = bumped.into_bytes();
    v.extend_from_slice(&good[first_line.len()..]);
    fs::write(&bad, &v).unwrap();
    assert!(matches!(expect_format_error(&bad), FormatError::VersionMismatch { found: 9, .. }));

    let out_cli = bench(&["inspect", s(&bad)]);
    assert_eq!(out_cli.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(bench(&["benchmark", "--methods", "svm"]).status.code(), Some(1));
    assert_eq!(bench(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(bench(&["benchmark", "--repeats", "0"]).status.code(), Some(1));
    assert_eq!(bench(&["inspect", "/nonexistent/file.qrd"]).status.code(), Some(2));
    assert!(bench(&["--help"]).status.success());
}

#[test]
fn benchmark_rows_carry_seed_and_hash() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    ok(&[
        "benchmark",
        "--out-dir",
        s(out),
        "--tm",
        "800,1600",
        "--methods",
        "gmm",
        "--repeats",
        "3",
        "--shots-per-state",
        "100",
        "--no-raw",
    ]);
    let results = Table::read(&out.join("results.csv")).unwrap();
    assert_eq!(results.rows.len(), 2 * 3);
    for i in 0..results.rows.len() {
        assert!(!results.get(i, "seed").unwrap().is_empty());
        assert_eq!(results.get(i, "config_hash").unwrap().len(), 16);
        assert_eq!(results.get(i, "status").unwrap(), "ok");
    }
    let summary = Table::read(&out.join("summary.csv")).unwrap();
    assert_eq!(summary.rows.len(), 2);

    let cmp = ok(&[
        "compare",
        s(&out.join("summary.csv")),
        s(&out.join("summary.csv")),
        "--a",
        "gmm",
        "--b",
        "gmm",
        "--output",
        s(&out.join("cmp.csv")),
    ]);
    assert!(cmp.contains("mean_all"));
    let t = Table::read(&out.join("cmp.csv")).unwrap();
    // no window reaches the long-window range here, so only the per-window rows and the overall mean are numbers
    for r in t.rows.iter().filter(|r| r[1].starts_with("tm_") || r[1] == "mean_all") {
        assert_eq!(r[2].parse::<f64>().unwrap(), 0.0);
    }
    assert_eq!(t.rows.iter().filter(|r| r[1].starts_with("tm_")).count(), 4);
}

#[test]
fn latent_probe_from_a_saved_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let common = ["--out-dir", s(out), "--tm", "800", "--shots-per-state", "150", "--no-raw"];
    ok(&[&["generate"], &common[..]].concat());
    ok(&[&["benchmark", "--methods", "pretrann", "--repeats", "1", "--save-models"], &common[..]].concat());
    let model = out.join("models").join("pretrann_tm800_r0.qrdm");
    assert!(model.exists());
    let csv = out.join("probe.csv");
    ok(&[
        "latent-probe",
        "--model",
        s(&model),
        "--data",
        s(&out.join("traj_tm800.qrd")),
        "--shot",
        "3",
        "--component",
        "1",
        "--range=-1,1,5",
        "--output",
        s(&csv),
    ]);
    let t = Table::read(&csv).unwrap();
    assert_eq!(t.rows.len(), 7);
    assert_eq!(t.header.len(), 2 + 2 * 50);
    assert_eq!(t.rows[0][0], "input");
    assert_eq!(t.rows[1][0], "reconstruction");

    let bad = bench(&[
        "latent-probe",
        "--model",
        s(&model),
        "--data",
        s(&out.join("traj_tm800.qrd")),
        "--shot",
        "100000",
    ]);
    assert_eq!(bad.status.code(), Some(1));
}
