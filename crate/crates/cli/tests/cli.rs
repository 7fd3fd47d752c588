//! End-to-end runs of the `tempus` binary: exit codes, manifests, and
//! byte-level determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn tempus(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tempus"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_cfg(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

const KIJ_CFG: &str = "\
[grid]
kind = symmetric
k_max = 10.0
n = 512

[packet]
component1 = 5.0:0.5:-20.0

[times]
t_min = 0.0
t_max = 8.0
n = 1601
";

fn manifest(dir: &Path) -> serde_json::Value {
    let text = fs::read_to_string(dir.join("run_manifest.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn metric(m: &serde_json::Value, key: &str) -> f64 {
    m["metrics"][key].as_str().unwrap().parse().unwrap()
}

#[test]
fn kijowski1d_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "run.cfg", KIJ_CFG);
    let out = tempus(dir.path(), &["kijowski1d", "--config", &cfg, "--out", "dist.csv"]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("dist.csv")).unwrap();
    assert!(csv.starts_with('#'));
    assert!(csv.lines().nth(1).unwrap().starts_with("t,pi,cumulative"));
    let m = manifest(dir.path());
    assert_eq!(m["subcommand"], "kijowski1d");
    assert_eq!(m["config"]["grid"]["n"], "512");
    assert!((metric(&m, "total") - 1.0).abs() < 1e-4);
    assert_eq!(m["outputs"][0], "dist.csv");
}

#[test]
fn unknown_flag_exits_2_with_usage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "run.cfg", KIJ_CFG);
    let out = tempus(dir.path(), &["kijowski1d", "--config", &cfg, "--out", "x.csv", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn missing_field_exits_2_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "run.cfg", &KIJ_CFG.replace("k_max = 10.0\n", ""));
    let out = tempus(dir.path(), &["kijowski1d", "--config", &cfg, "--out", "x.csv"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("k_max"), "stderr: {err}");
}

#[test]
fn malformed_line_exits_2_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "run.cfg", "[grid]\nkind symmetric\n");
    let out = tempus(dir.path(), &["kijowski1d", "--config", &cfg, "--out", "x.csv"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "stderr: {err}");
}

const COND_CFG: &str = "\
[space]
x_min = -60.0
x_max = 20.0
n = 1024

[packet]
component1 = 5.0:0.5:-15.0

[absorber]
center = 10.0
half_width = 8.0
strength = 6.0

[run]
dt = 0.002
steps = 3000
";

#[test]
fn conditional_normalizes_and_reports_arrival() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "run.cfg", COND_CFG);
    let out = tempus(dir.path(), &["conditional", "--config", &cfg, "--out", "cond.csv"]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(dir.path());
    assert!((metric(&m, "conditional_total") - 1.0).abs() < 1e-6);
    assert!(metric(&m, "total_arrival") > 0.9);
    assert!(dir.path().join("cond_run.csv").exists());
}

#[test]
fn stability_violation_exits_3_naming_the_bound() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "run.cfg", &COND_CFG.replace("dt = 0.002", "dt = 1.0"));
    let out = tempus(dir.path(), &["conditional", "--config", &cfg, "--out", "cond.csv"]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("stability"), "stderr: {err}");
}

#[test]
fn no_arrival_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "run.cfg",
        &COND_CFG
            .replace("component1 = 5.0:0.5:-15.0", "component1 = -5.0:0.5:-15.0")
            .replace("steps = 3000", "steps = 1200\neps_n = 0.1"),
    );
    let out = tempus(dir.path(), &["conditional", "--config", &cfg, "--out", "cond.csv"]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("arrival"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "run.cfg", KIJ_CFG);
    for (sub, threads) in [("a", "1"), ("b", "4")] {
        fs::create_dir(dir.path().join(sub)).unwrap();
        let out = tempus(
            dir.path(),
            &["kijowski1d", "--config", &cfg, "--out", &format!("{sub}/dist.csv"), "--threads", threads],
        );
        assert!(out.status.success());
    }
    let a = fs::read(dir.path().join("a/dist.csv")).unwrap();
    let b = fs::read(dir.path().join("b/dist.csv")).unwrap();
    assert_eq!(a, b);
    let ma = fs::read_to_string(dir.path().join("a/run_manifest.json")).unwrap();
    let mb = fs::read_to_string(dir.path().join("b/run_manifest.json")).unwrap();
    assert_eq!(ma.replace("a/dist.csv", "dist.csv"), mb.replace("b/dist.csv", "dist.csv"));
}

#[test]
fn times_and_units_overrides_land_in_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "run.cfg", KIJ_CFG);
    let out = tempus(
        dir.path(),
        &[
            "kijowski1d",
            "--config",
            &cfg,
            "--out",
            "dist.csv",
            "--times",
            "0:16:3201",
            "--units",
            "hbar=1,mass=2",
        ],
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(dir.path());
    assert_eq!(m["config"]["times"]["t_max"], "16");
    assert_eq!(m["config"]["units"]["mass"], "2");
    // heavier particle, same packet: still normalized on the doubled window
    assert!((metric(&m, "total") - 1.0).abs() < 1e-4);
}

#[test]
fn backflow_scan_fixture_feeds_current_compare() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "scan.cfg",
        "\
[grid]
kind = symmetric
k_max = 12.0
n = 512

[times]
t_min = -3.0
t_max = 3.0
n = 601

[scan]
k1 = 1.0
k2 = 3.0
sigma_k = 0.3
",
    );
    let out = tempus(dir.path(), &["backflow-scan", "--config", &cfg, "--out", "fixture.cfg"]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(dir.path());
    assert!(metric(&m, "min_current") < -1e-3);

    let out = tempus(dir.path(), &["current-compare", "--config", "fixture.cfg", "--out", "cc.csv"]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(dir.path());
    assert!(metric(&m, "min_current") < -1e-3);
    assert!(metric(&m, "min_pi") > -1e-12);
    // the fixture packets sit at x0 = 0, so the finite window only sees part
    // of the arrival mass; positivity is the point here, not normalization
    assert!(metric(&m, "total_pi") > 0.3);
}

#[test]
fn clock_scatter_normalizes_on_the_clock_window() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "run.cfg",
        "\
[grid]
kind = symmetric
k_max = 10.0
n = 512

[packet]
component1 = 5.0:0.5:-20.0

[potential]
kind = delta
strength = 1.0

[times]
t_min = -8.0
t_max = 0.0
n = 1201
",
    );
    let out = tempus(dir.path(), &["clock-scatter", "--config", &cfg, "--out", "clock.csv"]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(dir.path());
    assert!((metric(&m, "total") - 1.0).abs() < 1e-4);
    assert!(metric(&m, "unitarity_flux_deviation") < 1e-10);
    assert!(dir.path().join("clock_amplitudes.csv").exists());
}

#[test]
fn opnorm_reports_bounded_gram_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "run.cfg",
        "\
[space]
x_min = -60.0
x_max = 20.0
n = 1024

[basis]
packet1 = 5.0:0.5:-15.0
packet2 = 5.0:0.5:-20.0

[state]
coeff1 = 0.8:0.1
coeff2 = 0.5:-0.2

[absorber]
center = 10.0
half_width = 8.0
strength = 6.0

[run]
dt = 0.002
steps = 3500
",
    );
    let out = tempus(dir.path(), &["opnorm", "--config", &cfg, "--out", "op.csv"]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(dir.path());
    assert!((metric(&m, "total") - 1.0).abs() < 1e-6);
    assert!(metric(&m, "gram_eig_min") > -1e-8);
    assert!(metric(&m, "gram_eig_max") < 1.0 + 1e-6);
    assert!(metric(&m, "integral_identity_deviation") < 1e-4);
    assert!(dir.path().join("op_gram.csv").exists());
}

#[test]
fn schmidt_demo_round_trips_and_records_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "run.cfg",
        "\
[kernel]
n_energies = 16
n_channels = 2
rank = 4
seed = 7
",
    );
    let out = tempus(dir.path(), &["schmidt-demo", "--config", &cfg, "--out", "basis.csv"]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(dir.path());
    assert_eq!(m["seed"], 7);
    assert!((metric(&m, "rank") - 4.0).abs() < 0.5);
    assert!(metric(&m, "reconstruction_deviation") < 1e-10);
}
