//! End-to-end harness tests: schema stability, rerun determinism, and the
//! documented exit-code contract.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chemotaxis"))
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

#[test]
fn simulate_writes_pinned_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let status = bin()
        .args(["simulate", "--t-end", "0.02", "--dt", "1e-3", "--grid-n", "64"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());

    let csv = read(&out.join("diagnostics.csv"));
    let header = csv.lines().next().unwrap();
    assert_eq!(header, "t,mass_u,mass_v,mass_w,E0,E,D,sup_u,sup_v,w_H1");
    // t = 0 plus one row per output block.
    assert!(csv.lines().count() >= 3);

    let report: serde_json::Value =
        serde_json::from_str(&read(&out.join("report.json"))).unwrap();
    for key in [
        "schema_version",
        "experiment",
        "config_hash",
        "mass_drift_rel",
        "final",
        "termination",
        "assertions",
    ] {
        assert!(report.get(key).is_some(), "report.json missing key {key}");
    }
    assert_eq!(report["schema_version"], 1);
    // The exact configuration is persisted next to the outputs.
    let cfg: serde_json::Value = serde_json::from_str(&read(&out.join("config.json"))).unwrap();
    assert_eq!(cfg["experiment"], "simulate");
}

#[test]
fn rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let status = bin()
            .args([
                "simulate",
                "--t-end",
                "0.05",
                "--dt",
                "1e-3",
                "--grid-n",
                "64",
                "--seed",
                "7",
                "--write-fields",
            ])
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    for name in ["diagnostics.csv", "report.json", "config.json"] {
        assert_eq!(read(&a.join(name)), read(&b.join(name)), "{name} differs between reruns");
    }
    let fa = std::fs::read(a.join("fields/u_000000.bin")).unwrap();
    let fb = std::fs::read(b.join("fields/u_000000.bin")).unwrap();
    assert_eq!(fa, fb);
}

#[test]
fn field_snapshots_carry_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let status = bin()
        .args(["simulate", "--t-end", "0.02", "--dt", "1e-3", "--grid-n", "32", "--write-fields"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let meta: serde_json::Value =
        serde_json::from_str(&read(&out.join("fields/meta.json"))).unwrap();
    assert_eq!(meta["cells"], 32);
    let first = &meta["snapshots"][0];
    let ubin = std::fs::read(out.join("fields").join(first["u"].as_str().unwrap())).unwrap();
    assert_eq!(ubin.len(), 32 * 8);
    // Little-endian f64 payload must reproduce a finite nonnegative field.
    let v = f64::from_le_bytes(ubin[0..8].try_into().unwrap());
    assert!(v.is_finite() && v >= 0.0);
}

#[test]
fn constant_state_diagnostics_are_flat() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = serde_json::json!({
        "schema_version": 1,
        "experiment": "simulate",
        "params": {"nu": 1.0, "eps": 0.5, "diff": 1.0, "delta": 1.0, "variant": "a1"},
        "grid": {"kind": "radial_disk", "radius": 1.0, "cells": 64},
        "initial": {"kind": "constant", "mass": 3.0},
        "step": {"dt": 1e-3, "t_end": 0.1, "output_every": 20, "linear_tol": 1e-12,
                  "max_linear_iters": 0, "adaptive_cfl": false, "sup_cap": 1e8,
                  "store_snapshots": false},
        "seed": 1,
        "write_fields": false,
        "dt_levels": [],
        "etas": [],
        "masses": []
    });
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(&cfg_path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    let status = bin()
        .arg("simulate")
        .arg("--config")
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = read(&out.join("diagnostics.csv"));
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    let first = &rows[0];
    for row in &rows {
        for (k, (a, b)) in row.iter().zip(first).enumerate() {
            if k == 0 {
                continue; // time column advances
            }
            assert!(
                (a - b).abs() <= 1e-10 * b.abs().max(1.0),
                "column {k} drifted: {a} vs {b}"
            );
        }
    }
}

#[test]
fn exit_codes_follow_contract() {
    // Operational error: nonexistent config file.
    let status = bin()
        .args(["simulate", "--config", "/nonexistent/cfg.json"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));

    // Operational error: bad flag.
    let status = bin().args(["simulate", "--no-such-flag"]).status().unwrap();
    assert_eq!(status.code(), Some(1));

    // Assertion failure: the energy-identity check on a compactly
    // supported mollifier bump stalls (the log-rough support edge adds a
    // dt-independent residual floor), so the order assertion must fail
    // with exit 2 while the report is still written.
    let dir = tempfile::tempdir().unwrap();
    let cfg = serde_json::json!({
        "schema_version": 1,
        "experiment": "energy_check",
        "params": {"nu": 1.0, "eps": 0.5, "diff": 1.0, "delta": 1.0, "variant": "a1"},
        "grid": {"kind": "radial_disk", "radius": 1.0, "cells": 128},
        "initial": {"kind": "bump", "mass": 6.283185307179586, "center": [0.0, 0.0], "width": 0.4},
        "step": {"dt": 1e-4, "t_end": 0.05, "output_every": 100, "linear_tol": 1e-12,
                  "max_linear_iters": 0, "adaptive_cfl": false, "sup_cap": 1e8,
                  "store_snapshots": false},
        "seed": 1,
        "write_fields": false,
        "dt_levels": [4e-4, 2e-4, 1e-4],
        "etas": [],
        "masses": []
    });
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(&cfg_path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let out = dir.path().join("check");
    let status = bin()
        .arg("energy-check")
        .arg("--config")
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2), "stalled refinement must exit 2");
    // The report is still written, with the measured order attached.
    let report: serde_json::Value =
        serde_json::from_str(&read(&out.join("report.json"))).unwrap();
    assert_eq!(report["assertions"]["order_at_least_0p9"], false);
    assert!(report["min_order"].as_f64().unwrap() < 0.9);
}

#[test]
fn sweep_report_records_masses_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    // Small sweep: one bounded mass at the general threshold multiple is
    // flagged; the run itself completes quickly at a short horizon.
    let cfg = serde_json::json!({
        "schema_version": 1,
        "experiment": "threshold_sweep",
        "params": {"nu": 1.0, "eps": 0.5, "diff": 1.0, "delta": 2.0, "variant": "a1"},
        "grid": {"kind": "rect", "lx": 1.0, "ly": 1.0, "nx": 24, "ny": 24},
        "initial": {"kind": "bump", "mass": 1.0, "center": [0.5, 0.5], "width": 0.3},
        "step": {"dt": 5e-4, "t_end": 20.0, "output_every": 400, "linear_tol": 1e-12,
                  "max_linear_iters": 0, "adaptive_cfl": true, "sup_cap": 1e8,
                  "store_snapshots": false},
        "seed": 1,
        "write_fields": false,
        "dt_levels": [],
        "etas": [],
        "masses": [6.283185307179586, 12.566370614359172]
    });
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(&cfg_path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let status = bin()
        .arg("sweep")
        .arg("--config")
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success(), "sweep failed");
    let report: serde_json::Value =
        serde_json::from_str(&read(&out.join("report.json"))).unwrap();
    let records = report["records"].as_array().unwrap();
    assert_eq!(records.len(), 2);
    // Half the general threshold on a rectangle relaxes and plateaus.
    assert_eq!(records[0]["verdict"], "bounded-like");
    // 4 pi D on a rectangle is exactly the excluded mass multiple.
    let flagged = records[1]["flags"].as_array().unwrap();
    assert!(flagged
        .iter()
        .any(|f| f.as_str().unwrap().contains("outside_theory")));
    for r in records {
        assert!(r.get("config_hash").is_some());
        assert!(r.get("verdict").is_some());
        assert!(r.get("amplification").is_some());
    }
}

#[test]
fn report_schemas_are_pinned_per_experiment() {
    let dir = tempfile::tempdir().unwrap();

    let out = dir.path().join("check");
    let status = bin().arg("energy-check").arg("--out").arg(&out).status().unwrap();
    assert!(status.success());
    let report: serde_json::Value =
        serde_json::from_str(&read(&out.join("report.json"))).unwrap();
    for key in ["schema_version", "config_hash", "levels", "orders", "min_order", "assertions"] {
        assert!(report.get(key).is_some(), "energy-check report missing {key}");
    }

    let out = dir.path().join("stat");
    let status = bin()
        .args(["stationary", "--mass", "6.283", "--grid-n", "96"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let report: serde_json::Value =
        serde_json::from_str(&read(&out.join("report.json"))).unwrap();
    for key in ["solves", "least_converged_energy_upper_bound", "mass", "assertions"] {
        assert!(report.get(key).is_some(), "stationary report missing {key}");
    }
    let solve = &report["solves"][0];
    for key in ["seed", "converged", "iterations", "residual", "energy", "mean_w",
                "mean_w_expected", "mean_identity_gap", "grid_saturated"] {
        assert!(solve.get(key).is_some(), "stationary solve record missing {key}");
    }
    // Solved fields are persisted with their sidecar.
    assert!(out.join("fields_constant/meta.json").exists());

    let out = dir.path().join("probe");
    let status = bin().arg("theta-probe").arg("--out").arg(&out).status().unwrap();
    assert!(status.success());
    let report: serde_json::Value =
        serde_json::from_str(&read(&out.join("report.json"))).unwrap();
    let row = &report["table"]["rows"][0];
    for key in ["eta", "f_value", "energy", "grad_norm_sq", "clipped_mass", "identity_gap"] {
        assert!(row.get(key).is_some(), "probe row missing {key}");
    }
}

#[test]
fn print_config_emits_valid_template() {
    let output = bin().args(["energy-check", "--print-config"]).output().unwrap();
    assert!(output.status.success());
    let cfg: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(cfg["experiment"], "energy_check");
    assert_eq!(cfg["schema_version"], 1);
}
