//! End-to-end runs of the command-line driver.

use std::path::{Path, PathBuf};
use std::process::Command;

use levy_spde::cli::{main_entry, run, Cli, Subcommand};

const BIN: &str = env!("CARGO_BIN_EXE_levy-spde");

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn heat_linear(dir: &Path) -> PathBuf {
    write_config(
        dir,
        "heat.json",
        r#"{
          "schema_version": 1,
          "operator": {"kind": "heat", "dim": 1},
          "kernel": {"dim": 1, "kind": "heat", "alpha": 1.0},
          "measure": {"kind": "gamma", "alpha": 1.0, "beta": 1.0},
          "grid": {"dim": 1, "half_width": 8.0, "points": 64, "dt": 0.02, "horizon": 0.5, "record_every": 5},
          "analysis": {"p": [2, 3], "replicates": 60, "noise_cells": 400000},
          "seed": 31
        }"#,
    )
}

fn cli(sub: Subcommand, config: &Path, out: &Path) -> Cli {
    Cli {
        subcommand: sub,
        config: config.into(),
        seed: None,
        threads: Some(1),
        out: Some(out.into()),
        allow_no_dalang: false,
    }
}

fn read(path: PathBuf) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn failing_dalang_exits_3_with_reason() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "riesz.json",
        r#"{
          "schema_version": 1,
          "operator": {"kind": "heat", "dim": 3},
          "kernel": {"dim": 3, "kind": "riesz", "alpha": 0.5},
          "measure": {"kind": "gamma", "alpha": 1.0, "beta": 1.0},
          "grid": {"dim": 3, "half_width": 4.0, "points": 8, "dt": 0.01, "horizon": 0.5}
        }"#,
    );
    let out = dir.path().join("out");
    let o = Command::new(BIN)
        .args(["bounds", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
    let stderr = String::from_utf8(o.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1);
    assert!(
        stderr.contains("reason=dalang-condition-failed"),
        "{stderr}"
    );

    let o = Command::new(BIN)
        .args(["bounds", "--allow-no-dalang", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let summary: serde_json::Value = serde_json::from_str(&read(out.join("summary.json"))).unwrap();
    let diag = &summary["results"]["bounds"];
    assert_eq!(diag["diverges"], true);
    // the resolved part of M_2 grows like cutoff^{d-2-α}: factor 2^{1/2} per halving
    assert!((diag["increment_ratio"].as_f64().unwrap() - 2f64.sqrt()).abs() < 1e-3);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert_eq!(
        main_entry(["levy-spde", "bounds", "--config", "/no/such/file.json"]),
        2
    );
    assert_eq!(
        main_entry(["levy-spde", "no-such-subcommand", "--config", "x"]),
        2
    );
    let bad = write_config(
        dir.path(),
        "bad.json",
        r#"{"schema_version": 1, "operator": {"kind": "heat", "dim": 1}}"#,
    );
    assert_eq!(
        main_entry([
            "levy-spde".as_ref(),
            "bounds".as_ref(),
            "--config".as_ref(),
            bad.as_os_str()
        ]),
        2
    );

    let unknown = write_config(
        dir.path(),
        "unknown.json",
        &read(heat_linear(dir.path())).replace("\"seed\": 31", "\"seed\": 31, \"sede\": 1"),
    );
    let e = run(&cli(Subcommand::Bounds, &unknown, &out)).unwrap_err();
    assert_eq!(levy_spde::cli::exit_code(&e), 2);

    // the chaos series is only defined for the linear multiplicative model
    let e = run(&cli(
        Subcommand::AndersonSeries,
        &heat_linear(dir.path()),
        &out,
    ))
    .unwrap_err();
    assert_eq!(levy_spde::cli::reason(&e), "config-invalid");

    let wave3 = write_config(
        dir.path(),
        "wave3.json",
        r#"{
          "schema_version": 1,
          "operator": {"kind": "wave", "dim": 3},
          "kernel": {"dim": 3, "kind": "heat", "alpha": 1.0},
          "measure": {"kind": "gamma", "alpha": 1.0, "beta": 1.0},
          "grid": {"dim": 3, "half_width": 4.0, "points": 8, "dt": 0.01, "horizon": 0.5}
        }"#,
    );
    let e = run(&cli(Subcommand::Simulate, &wave3, &out)).unwrap_err();
    assert_eq!(
        (levy_spde::cli::exit_code(&e), levy_spde::cli::reason(&e)),
        (2, "unsupported")
    );
}

#[test]
fn blow_up_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "blow.json",
        r#"{
          "schema_version": 1,
          "operator": {"kind": "heat", "dim": 1},
          "kernel": {"dim": 1, "kind": "heat", "alpha": 1.0},
          "measure": {"kind": "gamma", "alpha": 1.0, "beta": 1.0},
          "grid": {"dim": 1, "half_width": 4.0, "points": 32, "dt": 0.01, "horizon": 1.0},
          "model": {"kind": "nonlinear", "sigma": {"kind": "constant", "value": 1.0},
                    "drift": {"kind": "scaled_linear", "scale": 60.0}}
        }"#,
    );
    let out = dir.path().join("out");
    let o = Command::new(BIN)
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8(o.stderr)
        .unwrap()
        .contains("reason=numerical-abort"));
}

#[test]
fn gamma_noise_check_recovers_m2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    run(&cli(Subcommand::NoiseCheck, &heat_linear(dir.path()), &out)).unwrap();
    let summary: serde_json::Value = serde_json::from_str(&read(out.join("summary.json"))).unwrap();
    let m2 = &summary["results"]["noise_check"]["m2"];
    assert_eq!(m2["exact"], 1.0);
    assert!(m2["rel_error"].as_f64().unwrap().abs() < 0.03);
    assert!(read(out.join("tables/noise_moments.csv"))
        .starts_with("quantity,exact,empirical,stderr,rel_error\n"));
}

#[test]
fn tables_are_identical_across_thread_counts_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = heat_linear(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    run(&cli(Subcommand::Moments, &cfg, &a)).unwrap();
    run(&Cli {
        threads: Some(2),
        ..cli(Subcommand::Moments, &cfg, &b)
    })
    .unwrap();
    run(&cli(Subcommand::Moments, &a.join("MANIFEST.json"), &c)).unwrap();
    for name in ["tables/moments.csv", "summary.json"] {
        let first = read(a.join(name));
        assert_eq!(first, read(b.join(name)), "{name}");
        assert_eq!(first, read(c.join(name)), "{name}");
    }
    let other = dir.path().join("other");
    run(&Cli {
        seed: Some(32),
        ..cli(Subcommand::Moments, &cfg, &other)
    })
    .unwrap();
    assert_ne!(
        read(a.join("tables/moments.csv")),
        read(other.join("tables/moments.csv"))
    );
}

#[test]
fn manifest_lists_every_artifact_with_digest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let outcome = run(&cli(Subcommand::Report, &heat_linear(dir.path()), &out)).unwrap();
    let manifest: serde_json::Value =
        serde_json::from_str(&read(out.join("MANIFEST.json"))).unwrap();
    let files = manifest["files"].as_array().unwrap();
    assert_eq!(files.len(), outcome.files.len());
    for f in files {
        let rel = f["path"].as_str().unwrap();
        let bytes = std::fs::read(out.join(rel)).unwrap();
        assert_eq!(f["bytes"].as_u64().unwrap() as usize, bytes.len(), "{rel}");
    }
    for needed in [
        "summary.json",
        "tables/noise_moments.csv",
        "tables/jp_p2.csv",
        "tables/moments.csv",
        "plots/jp_p2.svg",
    ] {
        assert!(outcome.files.iter().any(|f| f == needed), "{needed}");
    }
    assert_eq!(manifest["seed"], 31);
    assert!(manifest["config_hash"].as_str().unwrap().len() == 64);
    let svg = read(out.join("plots/jp_p2.svg"));
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
}
