//! End-to-end CLI checks: exit codes, file formats, manifests, and the
//! byte-identical reproducibility of experiment outputs.

use okpz::cli::{dispatch, RunManifest};
use std::fs;
use std::path::Path;

fn write_config(dir: &Path, m: usize, dt: f64, seed: u64) -> std::path::PathBuf {
    let path = dir.join("config.json");
    fs::write(
        &path,
        format!(
            r#"{{"a": 0.0, "b": 0.0, "m": {m}, "dt": {dt}, "t_horizon": 4.0, "seed": {seed}}}"#
        ),
    )
    .unwrap();
    path
}

fn run(args: &[&str]) -> i32 {
    dispatch(args.iter().map(|s| s.to_string()))
}

#[test]
fn check_quick_passes_on_defaults() {
    assert_eq!(run(&["okpz", "check", "--quick"]), 0);
}

#[test]
fn missing_config_exits_2() {
    let code = run(&["okpz", "sync", "--nmax", "2", "--seeds", "2", "--out", "/tmp/nope.csv"]);
    assert_eq!(code, 2);
}

#[test]
fn unknown_flag_exits_2() {
    assert_eq!(run(&["okpz", "kernel", "eval", "--no-such-flag"]), 2);
}

#[test]
fn solve_metric_roundtrip_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 16, 1e-3, 5);
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    for (seed, out) in [("5", &out_a), ("6", &out_b)] {
        let code = run(&[
            "okpz",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            seed,
            "solve",
            "--init",
            "delta:0.5",
            "--t1",
            "0.5",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let manifest = out.with_extension("csv.manifest.json");
        assert!(manifest.exists(), "missing manifest for {}", out.display());
        assert!(RunManifest::verify(&manifest).unwrap(), "digest mismatch");
    }
    let header = fs::read_to_string(&out_a).unwrap();
    assert!(header.starts_with("x,value\n"));
    assert_eq!(header.lines().count(), 18); // header + 17 nodes

    let code = run(&[
        "okpz",
        "--config",
        cfg.to_str().unwrap(),
        "metric",
        "dxbar",
        "--left",
        out_a.to_str().unwrap(),
        "--right",
        out_b.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
}

#[test]
fn sync_outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 16, 1e-3, 11);
    let mut bytes = Vec::new();
    for name in ["one.csv", "two.csv"] {
        let out = dir.path().join(name);
        let code = run(&[
            "okpz",
            "--config",
            cfg.to_str().unwrap(),
            "sync",
            "--nmax",
            "3",
            "--seeds",
            "4",
            "--metric",
            "dxbar",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        bytes.push(fs::read(&out).unwrap());
        assert!(out.with_extension("summary.json").exists());
    }
    assert_eq!(bytes[0], bytes[1], "sync CSVs differ between identical runs");
}

#[test]
fn kernel_check_writes_report_schema() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 16, 1e-3, 1);
    let report = dir.path().join("report.json");
    let code = run(&[
        "okpz",
        "--config",
        cfg.to_str().unwrap(),
        "kernel",
        "check",
        "--t-grid",
        "0.05,0.25",
        "--modes",
        "32",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    for key in ["positivity_min", "semigroup_defect", "growth_constant_C"] {
        assert!(json.get(key).is_some(), "report missing {key}");
    }
    assert!(json["positivity_min"].as_f64().unwrap() > 0.0);
}

#[test]
fn couple_profile_bound_column_holds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 16, 1e-3, 3);
    let out = dir.path().join("profile.csv");
    let code = run(&[
        "okpz",
        "--config",
        cfg.to_str().unwrap(),
        "couple",
        "profile",
        "--slabs",
        "3",
        "--delta",
        "0.05",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "N,tv_sup,bound");
    for line in lines {
        let cols: Vec<f64> = line.split(',').skip(1).map(|v| v.parse().unwrap()).collect();
        assert!(cols[0] <= cols[1] + 1e-12, "profile above bound: {line}");
    }
}

#[test]
fn polymer_tilt_json_has_matching_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 16, 1e-3, 8);
    let out = dir.path().join("tilt.json");
    let code = run(&[
        "okpz",
        "--config",
        cfg.to_str().unwrap(),
        "polymer",
        "tilt",
        "--h",
        "const:0.7",
        "--t",
        "0.5",
        "--paths",
        "300",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let v_mc = json["v_mc"].as_f64().unwrap();
    let v_exact = json["v_exact"].as_f64().unwrap();
    assert!((v_mc - (0.35f64).exp()).abs() < 1e-10);
    assert!((v_exact - (0.35f64).exp()).abs() < 1e-9);
}

#[test]
fn binary_smoke_test() {
    // The installed binary agrees with the library dispatch on usage errors.
    let output = std::process::Command::new(env!("CARGO_BIN_EXE_okpz"))
        .arg("--help")
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = String::from_utf8_lossy(&output.stdout);
    assert!(text.contains("sync"));
    let bad = std::process::Command::new(env!("CARGO_BIN_EXE_okpz"))
        .arg("--bogus")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
