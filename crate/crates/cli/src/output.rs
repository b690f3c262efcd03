//! Output writers: diagnostics CSV, JSON reports, and raw field snapshots
//! with a JSON sidecar. All writers are deterministic, so identical
//! configurations reproduce byte-identical files.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::Context;
use chemotaxis_core::{Diagnostics, GridKind, State};

pub const DIAGNOSTICS_HEADER: &str = "t,mass_u,mass_v,mass_w,E0,E,D,sup_u,sup_v,w_H1";

/// Write the diagnostics table as CSV, one row per output time.
pub fn write_diagnostics_csv(path: &Path, rows: &[Diagnostics]) -> anyhow::Result<()> {
    let mut out = String::with_capacity(rows.len() * 128 + 64);
    out.push_str(DIAGNOSTICS_HEADER);
    out.push('\n');
    for d in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            d.time,
            d.mass_u,
            d.mass_v,
            d.mass_w,
            d.energy_e0,
            d.energy_e,
            d.dissipation,
            d.sup_u,
            d.sup_v,
            d.w_h1_norm
        ));
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

/// Pretty-printed JSON report.
pub fn write_report(path: &Path, report: &serde_json::Value) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_f64_le(path: &Path, values: &[f64]) -> anyhow::Result<()> {
    let mut file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut buf = Vec::with_capacity(values.len() * 8);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    file.write_all(&buf)?;
    Ok(())
}

/// Write one field per file (`u_000003.bin` etc., flat little-endian f64 in
/// cell order) and a `meta.json` sidecar describing grid and layout.
pub fn write_field_snapshots(
    dir: &Path,
    grid_kind: GridKind,
    snapshots: &[State],
) -> anyhow::Result<()> {
    fs::create_dir_all(dir)?;
    let mut entries = Vec::new();
    for (k, st) in snapshots.iter().enumerate() {
        let names = [
            (format!("u_{k:06}.bin"), st.u.values()),
            (format!("v_{k:06}.bin"), st.v.values()),
            (format!("w_{k:06}.bin"), st.w.values()),
        ];
        for (name, values) in &names {
            write_f64_le(&dir.join(name), values)?;
        }
        entries.push(serde_json::json!({
            "index": k,
            "time": st.time,
            "u": format!("u_{k:06}.bin"),
            "v": format!("v_{k:06}.bin"),
            "w": format!("w_{k:06}.bin"),
        }));
    }
    let cells = snapshots.first().map(|s| s.u.len()).unwrap_or(0);
    let meta = serde_json::json!({
        "grid": grid_kind,
        "layout": "flat array of f64, little endian, one value per cell in grid order",
        "cells": cells,
        "snapshots": entries,
    });
    write_report(&dir.join("meta.json"), &meta)
}
