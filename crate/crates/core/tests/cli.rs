use std::path::Path;
use std::process::Command;

use bundlejc::cli::*;

const SCAN: &str = r#"
preset = "steadyscan"

[model]
n = 2
delta_n = -49.5
omega_l = 21.0
n_max = 8

[scan]
variable = "delta_a"
min = -5.0
max = 25.0
points = 7
"#;

fn scan_config(extra: &str) -> ExperimentConfig {
    parse_config(&format!("{SCAN}\n{extra}")).unwrap()
}

#[test]
fn duplicate_scan_points_give_identical_rows() {
    let mut cfg = scan_config("");
    cfg.scan.min = 21.2841;
    cfg.scan.max = 21.2841;
    cfg.scan.points = 2;
    let d = sweep(&cfg).unwrap();
    assert_eq!(d.rows.len(), 2);
    assert_eq!(d.rows[0], d.rows[1]);
}

#[test]
fn sweep_is_independent_of_thread_count() {
    let cfg = scan_config("");
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| sweep(&cfg).unwrap());
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(|| sweep(&cfg).unwrap());
    assert_eq!(one, four);
    assert_eq!(one.column("delta_a").unwrap(), cfg.scan.grid());
}

#[test]
fn csv_rows_have_consistent_width() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scan_config("");
    run_preset(&cfg, dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("steadyscan.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.first(), Some(&"delta_a"));
    assert_eq!(header.last(), Some(&"status"));
    for l in lines {
        assert_eq!(l.split(',').count(), header.len());
    }
}

#[test]
fn metadata_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scan_config("");
    run_preset(&cfg, dir.path()).unwrap();
    let again = tempfile::tempdir().unwrap();
    let reloaded = load_config(&dir.path().join("metadata.json")).unwrap();
    assert_eq!(reloaded, cfg);
    run_preset(&reloaded, again.path()).unwrap();
    for name in ["steadyscan.csv", "resolved_config.toml"] {
        assert_eq!(
            std::fs::read(dir.path().join(name)).unwrap(),
            std::fs::read(again.path().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn truncated_points_are_flagged_not_fatal() {
    let cfg = parse_config(
        r#"
        preset = "steadyscan"
        [model]
        n = 3
        delta_n = -79.5
        omega_l = 24.0
        n_max = 6
        [scan]
        min = -1.0
        max = 1.0
        points = 3
        "#,
    )
    .unwrap();
    let d = sweep(&cfg).unwrap();
    assert!(d.rows.iter().any(|r| r.status == "truncation"));
    assert!(d.to_csv().is_ok());
}

#[test]
fn preset_mismatch_is_rejected() {
    let cfg = scan_config("");
    assert!(cfg.clone().for_preset(Preset::Superrabi).is_err());
    assert!(cfg.for_preset(Preset::Steadyscan).is_ok());
}

#[test]
fn superrabi_dataset_columns() {
    let cfg = parse_config(&std::fs::read_to_string(configs().join("superrabi_n2.toml")).unwrap()).unwrap();
    let out = execute(&cfg).unwrap();
    let d = &out.datasets[0];
    assert_eq!(d.columns, ["t", "P_0_plus", "P_2_minus", "analytic"]);
    assert_eq!(d.rows.len(), 1001);
    assert!(d.rows.iter().all(|r| r.is_ok()));
}

#[test]
fn shipped_configs_parse() {
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let cfg = load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(cfg.preset.is_some(), "{}", path.display());
        derived_quantities(&cfg).unwrap();
    }
}

fn configs() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs"))
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bundlejc"))
}

#[test]
fn binary_reports_errors_with_failure_status() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[model]\nn = 2\nomega_l = 1.0\ndelta_n = -3.0\n[scan]\npoints = -5\n").unwrap();
    let out = bin().args(["steadyscan", "--config"]).arg(&bad).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("scan.points"), "{err}");

    let missing = bin().args(["steadyscan", "--config", "/nonexistent.toml"]).output().unwrap();
    assert!(!missing.status.success());
}

#[test]
fn binary_dry_run_prints_resolved_config() {
    let out = bin()
        .args(["superrabi", "--dry-run", "--config"])
        .arg(configs().join("superrabi_n2.toml"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("[model]"));
    assert!(text.contains("delta_a"));
    assert!(text.contains("effective_two_level"));
}

#[test]
fn binary_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["resonances", "--config"])
        .arg(configs().join("resonances_n2.toml"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("metadata.json").exists());
    assert!(dir.path().join("resolved_config.toml").exists());
}
