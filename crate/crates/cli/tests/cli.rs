//! Black-box tests of the `forge` binary: config handling, exit
//! codes, and output determinism.

use std::path::Path;
use std::process::{Command, Output};

fn forge(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_forge"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawning forge")
}

fn write(dir: &Path, name: &str, contents: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path.display().to_string()
}

#[test]
fn same_config_and_seed_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "sweep.toml",
        "kind = \"gap-sweep\"\nn = 2\nm = 2\ndelta_e2 = [1e-3]\nsamples = 3\nseed = 7\n",
    );
    let a = forge(&["run", &cfg, "--out", "a"], tmp.path());
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let b = forge(&["run", &cfg, "--out", "b"], tmp.path());
    assert!(b.status.success());
    let csv_a = std::fs::read(tmp.path().join("a/gap_sweep.csv")).unwrap();
    let csv_b = std::fs::read(tmp.path().join("b/gap_sweep.csv")).unwrap();
    assert_eq!(csv_a, csv_b);

    // worker count must not change the result either
    let c = forge(&["run", &cfg, "--out", "c", "--workers", "2"], tmp.path());
    assert!(c.status.success());
    let csv_c = std::fs::read(tmp.path().join("c/gap_sweep.csv")).unwrap();
    assert_eq!(csv_a, csv_c);

    // a different seed must change it
    let d = forge(&["run", &cfg, "--out", "d", "--seed", "8"], tmp.path());
    assert!(d.status.success());
    let csv_d = std::fs::read(tmp.path().join("d/gap_sweep.csv")).unwrap();
    assert_ne!(csv_a, csv_d);
}

#[test]
fn gap_sweep_emits_the_documented_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "sweep.toml",
        "kind = \"gap-sweep\"\nn = 2\nm = 2\ndelta_e2 = [1e-3, 1e-2]\nsamples = 2\nseed = 3\n",
    );
    let out = forge(&["run", &cfg, "--out", "o"], tmp.path());
    assert!(out.status.success());
    let csv = std::fs::read_to_string(tmp.path().join("o/gap_sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "seed,delta_e2_target,delta_e2_realized,gap,gamma_max,gamma_max_prime,\
         haar_rate_exact,haar_bound,symmetry_error,steady_count"
    );
    assert_eq!(lines.count(), 4, "rows = samples x targets");
}

#[test]
fn validate_fills_documented_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "minimal.toml",
        "kind = \"gap-sweep\"\nn = 3\ndelta_e2 = [0.01]\n",
    );
    let out = forge(&["validate", &cfg], tmp.path());
    assert!(out.status.success());
    let echo: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(echo["sigma"], 1.0);
    assert_eq!(echo["tol"], 1e-8);
    assert_eq!(echo["samples"], 100);
    assert_eq!(echo["ensemble"], "ginibre");
}

#[test]
fn out_of_range_target_names_the_bound() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "bad.toml",
        "kind = \"gap-sweep\"\nn = 2\ndelta_e2 = [0.7]\n",
    );
    let out = forge(&["validate", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("0.5"), "must name the bound: {err}");
}

#[test]
fn duplicate_keys_report_both_locations() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "dup.toml",
        "kind = \"xxz\"\nn = 2\nv = 0.3\nn = 3\n",
    );
    let out = forge(&["validate", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("lines 2 and 4"),
        "must list both occurrences: {err}"
    );
}

#[test]
fn problems_are_listed_collectively() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "bad.toml",
        "kind = \"gap-sweep\"\nn = 2\ndelta_e2 = [0.7]\nsamples = 0\nmystery = 1\nriddle = 2\n",
    );
    let out = forge(&["validate", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    for needle in ["mystery", "riddle", "samples", "0.5"] {
        assert!(err.contains(needle), "missing `{needle}` in: {err}");
    }
}

#[test]
fn missing_file_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = forge(&["run", "nowhere.toml"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn spectrum_lists_every_eigenvalue_with_midgap_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "spec.toml",
        "kind = \"spectrum\"\nmodel = \"xxz\"\nn = 2\nj_z = 0.0\ndelta_e2 = [1e-3]\n",
    );
    let out = forge(&["run", &cfg, "--out", "o"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("o/spectrum.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 256);
    let midgap: usize = rows
        .iter()
        .map(|r| r.split(',').nth(3).unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(midgap, 2);

    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("o/spectrum.json")).unwrap())
            .unwrap();
    assert_eq!(sidecar["summary"]["midgap_count"], 2);
    assert_eq!(sidecar["summary"]["total_dim"], 256);
}

#[test]
fn failing_realizations_flag_rows_and_exit_two_when_total() {
    // delta = 0 makes every Schmidt weight equal, which the cascaded
    // construction rejects; every realization fails, so the run exits 2
    // but still writes flagged rows.
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "cqa.toml",
        "kind = \"cqa\"\nn = 2\ndelta_e2 = [0.0]\nsamples = 3\nseed = 5\n",
    );
    let out = forge(&["run", &cfg, "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let csv = std::fs::read_to_string(tmp.path().join("o/cqa.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    for row in rows {
        assert!(row.contains("NaN"), "row should be flagged: {row}");
    }
}

#[test]
fn chain_kinds_report_the_rainbow_family() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "ladder.toml",
        "kind = \"ladder\"\nn = 2\nj_z = 0.5\ndelta_e2 = [1e-3, 1e-2]\n",
    );
    let out = forge(&["run", &cfg, "--out", "o"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("o/ladder.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    for row in rows {
        let resid: f64 = row.split(',').nth(5).unwrap().parse().unwrap();
        assert!(resid <= 1e-9, "rainbow residual too large: {row}");
    }
}

#[test]
fn uneven_kind_reports_darkness_and_bound() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "uneven.toml",
        "kind = \"uneven\"\nn = 2\nn_b = 4\nsigma_b = 0.5\ndelta_e2 = [0.05]\nsamples = 3\nseed = 11\n",
    );
    let out = forge(&["run", &cfg, "--out", "o"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("o/uneven.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    for row in rows {
        let cells: Vec<&str> = row.split(',').collect();
        let dark: f64 = cells[6].parse().unwrap();
        assert!(dark <= 1e-9, "jump must keep the target dark: {row}");
        let gamma: f64 = cells[3].parse().unwrap();
        assert!(gamma.is_finite() && gamma >= 0.0);
    }
}
