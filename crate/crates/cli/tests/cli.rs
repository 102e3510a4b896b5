use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn geogate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geogate"))
        .args(args)
        .output()
        .expect("spawn geogate")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const SMALL_FF: &str = r#"{
    "settings": {"points_per_decade": 6, "phase_step": 0.02, "rel_tol": 1e-3},
    "curve_min": 0.01, "curve_max": 1.0, "curve_points_per_decade": 4, "curve_phase_step": 0.02
}"#;

#[test]
fn scan_writes_fixed_columns_and_unit_zero_row() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "scan.json", r#"{"gate": "X/2", "min": -0.2, "max": 0.2, "points": 9}"#);
    let out = geogate(&["--config", &cfg, "--out", dir.path().to_str().unwrap(), "scan"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("scan.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "error,fidelity_naive,fidelity_geo,fidelity_opt,fidelity_opt_perfect");
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 9);
    let zero = rows.iter().find(|r| r[0] == 0.0).expect("δ = 0 row");
    for v in &zero[1..] {
        assert!((v - 1.0).abs() < 1e-12, "{zero:?}");
    }
    // Mirror rows agree for x-rotations.
    for (a, b) in rows.iter().zip(rows.iter().rev()) {
        for k in 1..5 {
            assert!((a[k] - b[k]).abs() < 1e-12);
        }
    }
    assert_eq!(read_json(&dir.path().join("scan_summary.json"))["schema_version"], 1);
}

#[test]
fn empty_scan_grid_is_usage_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "scan.json", r#"{"grid": []}"#);
    let out = geogate(&["--config", &cfg, "--out", dir.path().to_str().unwrap(), "scan"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
    assert!(!dir.path().join("scan.csv").exists());
}

#[test]
fn unknown_config_key_rejected() {
    let dir = TempDir::new().unwrap();
    for (cmd, body) in [
        ("scan", r#"{"pionts": 3}"#),
        ("rb", r#"{"sigma": 0.02}"#),
        ("ff", r#"{"spectrum": {"s_0": 1.0}}"#),
        ("lindblad", r#"{"gamma1": 1e-4}"#),
        ("path", r#"{"delta": 0.2}"#),
    ] {
        let cfg = write_config(dir.path(), "bad.json", body);
        let out = geogate(&["--config", &cfg, "--out", dir.path().to_str().unwrap(), cmd]);
        assert_eq!(out.status.code(), Some(2), "{cmd}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("unknown field"), "{cmd}");
    }
}

#[test]
fn unsupported_schema_version_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "v.json", r#"{"schema_version": 99}"#);
    let out = geogate(&["--config", &cfg, "--out", dir.path().to_str().unwrap(), "scan"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn rb_is_byte_deterministic() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let body = r#"{"lengths": [1, 10, 40, 100], "sequences_per_length": 12, "family": "geo"}"#;
    for dir in [&a, &b] {
        let cfg = write_config(dir.path(), "rb.json", body);
        let out = geogate(&["--config", &cfg, "--out", dir.path().to_str().unwrap(), "--seed", "11", "rb"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["rb_geo.csv", "rb_geo_summary.json"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    let s = read_json(&a.path().join("rb_geo_summary.json"));
    assert_eq!(s["seed"], 11);
    assert_eq!(s["K"], 12);
    assert_eq!(s["schema_version"], 1);
    let csv = fs::read_to_string(a.path().join("rb_geo.csv")).unwrap();
    assert!(csv.starts_with("n,mean_survival,stderr\n"));
}

#[test]
fn rb_without_noise_has_unit_fidelity() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "rb.json",
        r#"{"sigma_delta": 0.0, "lengths": [1, 5, 20], "sequences_per_length": 4}"#,
    );
    for family in ["naive", "geo", "opt", "twopi"] {
        let out = geogate(&["--config", &cfg, "--out", dir.path().to_str().unwrap(), "--family", family, "--json", "rb"]);
        assert!(out.status.success(), "{family}: {}", String::from_utf8_lossy(&out.stderr));
        let s: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert!((s["F"].as_f64().unwrap() - 1.0).abs() < 1e-12, "{family}: {s}");
    }
}

#[test]
fn rb_interleaved_reports_gate_fidelity() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "rb.json", r#"{"lengths": [1, 10, 50], "sequences_per_length": 8}"#);
    let out = geogate(&["--config", &cfg, "--out", dir.path().to_str().unwrap(), "--json", "rb", "--interleaved", "Z/4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s: Value = serde_json::from_slice(&out.stdout).unwrap();
    let f = s["interleaved_fidelity"].as_f64().unwrap();
    assert!(f > 0.99 && f < 1.01, "{s}");
    assert!(dir.path().join("rb_opt_Z_4_interleaved.csv").exists());
    let bad = geogate(&["--config", &cfg, "--out", dir.path().to_str().unwrap(), "rb", "--interleaved", "H"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn ff_without_noise_has_unit_fidelities() {
    let dir = TempDir::new().unwrap();
    let body = SMALL_FF.replacen('{', r#"{"spectrum": {"s0": 0.0},"#, 1);
    let cfg = write_config(dir.path(), "ff.json", &body);
    let out = geogate(&["--config", &cfg, "--out", dir.path().to_str().unwrap(), "ff"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = read_json(&dir.path().join("ff_table.json"));
    assert_eq!(table["schema_version"], 1);
    let rows = table["fidelities"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for row in rows {
        let row = row.as_array().unwrap();
        assert_eq!(row.len(), 6);
        assert!(row.iter().all(|v| v.as_f64() == Some(1.0)));
    }
    let csv = fs::read_to_string(dir.path().join("ff_curves_X_2.csv")).unwrap();
    assert!(csv.starts_with("f_over_frabi,ff_naive,ff_geo,ff_opt\n"));
}

#[test]
fn ff_convergence_report() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "ff.json", SMALL_FF);
    let out = geogate(&["--config", &cfg, "--out", dir.path().to_str().unwrap(), "--json", "ff", "--check-convergence"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.path().join("ff_convergence.json"));
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["entries"].as_array().unwrap().len(), 18);
    assert!(report["max_rel_change"].as_f64().unwrap() <= report["tolerance"].as_f64().unwrap());
    assert_eq!(report["converged"], true);
}

#[test]
fn ff_sweep_reports_best_cutoff() {
    let dir = TempDir::new().unwrap();
    let body = SMALL_FF.replacen('{', r#"{"f_lo_candidates": [10.0, 1000.0],"#, 1);
    let cfg = write_config(dir.path(), "ff.json", &body);
    let out = geogate(&["--config", &cfg, "--out", dir.path().to_str().unwrap(), "ff-sweep"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.path().join("ff_sweep.json"));
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["entries"].as_array().unwrap().len(), 2);
    let best = report["best_f_lo"].as_f64().unwrap();
    assert!(best == 10.0 || best == 1000.0);
}

#[test]
fn lindblad_writes_curves_and_passes_oracles() {
    let dir = TempDir::new().unwrap();
    let out = geogate(&["--out", dir.path().to_str().unwrap(), "--json", "lindblad"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(s["schema_version"], 1);
    assert!(s["unitary_oracle_defect"].as_f64().unwrap() <= 1e-8);
    assert!(s["dt_halving_max_change"].as_f64().unwrap() <= 1e-6);
    let runs = s["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 3);
    let added: Vec<f64> = runs.iter().map(|r| r["added_infidelity"].as_f64().unwrap()).collect();
    assert!(added.windows(2).all(|w| w[0] <= w[1]), "{added:?}");
    let csv = fs::read_to_string(dir.path().join("lindblad_gamma1_1e-4.csv")).unwrap();
    assert!(csv.starts_with("t_over_T,fidelity\n"));
}

#[test]
fn path_loops_close_only_when_corrected() {
    let dir = TempDir::new().unwrap();
    let out = geogate(&["--out", dir.path().to_str().unwrap(), "--json", "path"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s: Value = serde_json::from_slice(&out.stdout).unwrap();
    let gap = |fam: &str, d: f64| {
        s["paths"]
            .as_array()
            .unwrap()
            .iter()
            .find(|p| p["family"] == fam && p["delta"].as_f64() == Some(d))
            .unwrap()["endpoint_gap"]
            .as_f64()
            .unwrap()
    };
    assert!(gap("conventional_geometric", 0.0) < 1e-9);
    assert!(gap("optimized_geometric", 0.0) < 1e-9);
    assert!(gap("conventional_geometric", 0.2) > 0.3);
    assert!(gap("optimized_geometric", 0.2) < 0.5 * gap("conventional_geometric", 0.2));
    let csv = fs::read_to_string(dir.path().join("path_geo_delta0.2.csv")).unwrap();
    assert!(csv.starts_with("t,x,y,z\n"));
}

#[test]
fn check_passes_and_emits_json() {
    let out = geogate(&["check", "--json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["all_passed"], true);
    let checks = report["checks"].as_array().unwrap();
    assert!(checks.iter().any(|c| c["name"] == "zero_noise_target_opt"));
    let text = geogate(&["check"]);
    assert!(String::from_utf8_lossy(&text.stdout).contains("all gating checks passed"));
}

#[test]
fn bad_family_flag_is_usage_error() {
    let out = geogate(&["--family", "hadamard", "scan"]);
    assert_eq!(out.status.code(), Some(2));
}
