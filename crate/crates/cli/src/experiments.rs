//! The five experiment drivers. Each writes its outputs under the chosen
//! directory and returns whether the experiment's own assertions held
//! (process exit code 2 signals an assertion failure, 1 an operational
//! error).

use std::path::Path;
use std::sync::Arc;

use anyhow::Context;
use serde_json::json;

use chemotaxis_core as core;
use chemotaxis_core::{
    energy, energy_identity_check, estimate_mu_m, ops, run, Field, Grid, GridKind, State,
    Termination, ThetaEtaSpec, Trajectory, Variant,
};

use crate::config::{ExperimentKind, InitialSpec, RunConfig};
use crate::output;

/// Relative mass-conservation budget asserted on every simulate run.
const MASS_DRIFT_TOL: f64 = 1e-10;
/// Mean-value identity budget for converged stationary states.
const MEAN_IDENTITY_TOL: f64 = 1e-8;
/// Minimum empirical order for the energy-identity refinement.
const MIN_IDENTITY_ORDER: f64 = 0.9;

pub struct Outcome {
    pub assertions_ok: bool,
    pub failures: Vec<String>,
}

impl Outcome {
    fn ok() -> Outcome {
        Outcome { assertions_ok: true, failures: Vec::new() }
    }
    fn fail(msg: String) -> Outcome {
        Outcome { assertions_ok: false, failures: vec![msg] }
    }
}

pub fn build_grid(cfg: &RunConfig) -> anyhow::Result<Arc<Grid>> {
    Ok(Grid::from_kind(cfg.grid)?)
}

pub fn build_initial(cfg: &RunConfig, grid: &Arc<Grid>) -> anyhow::Result<State> {
    let p = &cfg.params;
    let st = match &cfg.initial {
        InitialSpec::Constant { mass } => core::build_constant(*mass, p, grid)?,
        InitialSpec::Bump { mass, center, width } => {
            core::build_bump(*mass, *center, *width, p, grid)?
        }
        InitialSpec::CosineBump { mass, amplitude, v_scale, v_amplitude } => {
            core::build_cosine_bump(*mass, *amplitude, *v_scale, *v_amplitude, p, grid)?
        }
        InitialSpec::ThetaEta { mass, eta, anchor } => {
            core::build_theta_eta(&ThetaEtaSpec { eta: *eta, anchor: *anchor, mass: *mass }, p, grid)?
                .state
        }
        InitialSpec::Random { mass, amplitude } => {
            core::build_random(*mass, cfg.seed, *amplitude, p, grid)?
        }
    };
    Ok(st)
}

fn trajectory_summary(traj: &Trajectory, cfg: &RunConfig) -> serde_json::Value {
    let last = traj.diagnostics.last().expect("at least one record");
    json!({
        "termination": traj.termination,
        "steps": traj.steps,
        "substeps": traj.substeps,
        "min_u": traj.min_u,
        "min_v": traj.min_v,
        "min_w": traj.min_w,
        "final": last,
        "config_hash": cfg.hash(),
    })
}

pub fn simulate(cfg: &RunConfig, out_dir: &Path) -> anyhow::Result<Outcome> {
    let grid = build_grid(cfg)?;
    let initial = build_initial(cfg, &grid)?;
    let mut step = cfg.step;
    step.store_snapshots = cfg.write_fields;
    let traj = run(&initial, &cfg.params, &step)?;

    output::write_diagnostics_csv(&out_dir.join("diagnostics.csv"), &traj.diagnostics)?;
    if cfg.write_fields {
        output::write_field_snapshots(&out_dir.join("fields"), grid.kind(), &traj.snapshots)?;
    }

    let mass0 = traj.diagnostics[0].mass_u;
    let drift = traj
        .diagnostics
        .iter()
        .map(|d| (d.mass_u - mass0).abs() / mass0)
        .fold(0.0, f64::max);
    let positive = traj.min_u >= 0.0 && traj.min_v >= 0.0;

    let mut report = trajectory_summary(&traj, cfg);
    report["schema_version"] = json!(crate::config::SCHEMA_VERSION);
    report["experiment"] = json!("simulate");
    report["mass_drift_rel"] = json!(drift);
    report["assertions"] = json!({
        "mass_conserved": drift <= MASS_DRIFT_TOL,
        "fields_nonnegative": positive,
    });
    output::write_report(&out_dir.join("report.json"), &report)?;

    if drift > MASS_DRIFT_TOL {
        return Ok(Outcome::fail(format!("mass drift {drift:e} exceeds {MASS_DRIFT_TOL:e}")));
    }
    if !positive {
        return Ok(Outcome::fail("negative cell values encountered".into()));
    }
    Ok(Outcome::ok())
}

pub fn energy_check(cfg: &RunConfig, out_dir: &Path) -> anyhow::Result<Outcome> {
    if cfg.dt_levels.len() < 3 {
        anyhow::bail!("energy check needs at least 3 dt levels, each halving the last");
    }
    for pair in cfg.dt_levels.windows(2) {
        let ratio = pair[0] / pair[1];
        if !(1.9..=2.1).contains(&ratio) {
            anyhow::bail!("dt levels must halve: got {} then {}", pair[0], pair[1]);
        }
    }
    let grid = build_grid(cfg)?;
    let initial = build_initial(cfg, &grid)?;
    let rep =
        energy_identity_check(&initial, &cfg.params, &cfg.step, &cfg.dt_levels, cfg.step.t_end)?;
    let min_order = rep.min_order();
    let monotone = rep
        .levels
        .windows(2)
        .all(|pair| pair[1].max_residual < pair[0].max_residual);

    let report = json!({
        "schema_version": crate::config::SCHEMA_VERSION,
        "experiment": "energy_check",
        "config_hash": cfg.hash(),
        "levels": rep.levels,
        "orders": rep.orders,
        "min_order": min_order,
        "assertions": {
            "order_at_least_0p9": min_order >= MIN_IDENTITY_ORDER,
            "residuals_monotone": monotone,
        },
    });
    output::write_report(&out_dir.join("report.json"), &report)?;

    if !monotone {
        return Ok(Outcome::fail(format!("residuals not monotone: {:?}", rep.levels)));
    }
    if min_order < MIN_IDENTITY_ORDER {
        return Ok(Outcome::fail(format!("empirical order {min_order} below {MIN_IDENTITY_ORDER}")));
    }
    Ok(Outcome::ok())
}

pub fn stationary(cfg: &RunConfig, out_dir: &Path) -> anyhow::Result<Outcome> {
    let grid = build_grid(cfg)?;
    let p = &cfg.params;
    let mass = cfg.initial.mass();
    let omega = grid.domain_volume();
    let knobs = &cfg.stationary;

    let mut seeds: Vec<(String, Field)> =
        vec![("constant".into(), Field::constant(&grid, mass / (p.delta * omega)))];
    for &width in &knobs.seed_widths {
        let st = core::build_bump(mass, [0.0, 0.0], width, p, &grid)?;
        seeds.push((format!("bump_w{width}"), st.w));
    }

    let mut records = Vec::new();
    let mut best: Option<(usize, core::StationaryState)> = None;
    let mut any_converged = false;
    let mut mean_identity_ok = true;
    for (idx, (name, seed)) in seeds.iter().enumerate() {
        let (state, converged) = core::solve_stationary_best_effort(
            mass,
            p,
            seed,
            knobs.damping,
            knobs.tol,
            knobs.max_iters,
        )?;
        let mean_gap = core::stationary::mean_signal_identity_gap(&state, p);
        let saturated = grid_saturated(&state.u_star, mass, &grid);
        if converged {
            any_converged = true;
            if mean_gap > MEAN_IDENTITY_TOL {
                mean_identity_ok = false;
            }
            let better = match &best {
                None => true,
                Some((_, b)) => state.energy < b.energy,
            };
            if better {
                best = Some((idx, state.clone()));
            }
        }
        records.push(json!({
            "seed": name,
            "converged": converged,
            "iterations": state.iterations,
            "residual": state.residual,
            "energy": state.energy,
            "mean_w": ops::mean(&state.w_star),
            "mean_w_expected": mass / (p.delta * omega),
            "mean_identity_gap": mean_gap,
            "grid_saturated": saturated,
        }));
        // Persist the fields of every solve (converged or last iterate).
        let snap = State::new(state.u_star.clone(), state.v_star.clone(), state.w_star.clone(), 0.0)?;
        output::write_field_snapshots(&out_dir.join(format!("fields_{name}")), grid.kind(), &[snap])?;
    }

    let mu_upper = best.as_ref().map(|(_, s)| s.energy);
    let report = json!({
        "schema_version": crate::config::SCHEMA_VERSION,
        "experiment": "stationary",
        "config_hash": cfg.hash(),
        "mass": mass,
        "solves": records,
        "least_converged_energy_upper_bound": mu_upper,
        "assertions": {
            "any_converged": any_converged,
            "mean_identity": mean_identity_ok,
        },
    });
    output::write_report(&out_dir.join("report.json"), &report)?;

    if !any_converged {
        return Ok(Outcome::fail("no seed converged; last iterates persisted".into()));
    }
    if !mean_identity_ok {
        return Ok(Outcome::fail("mean-value identity violated on a converged state".into()));
    }
    Ok(Outcome::ok())
}

pub fn theta_probe(cfg: &RunConfig, out_dir: &Path) -> anyhow::Result<Outcome> {
    let grid = build_grid(cfg)?;
    let mass = cfg.initial.mass();
    let table = core::energy_divergence_probe(mass, &cfg.params, &grid, &cfg.etas)?;
    let max_gap = table.rows.iter().map(|r| r.identity_gap).fold(0.0, f64::max);
    let report = json!({
        "schema_version": crate::config::SCHEMA_VERSION,
        "experiment": "theta_probe",
        "config_hash": cfg.hash(),
        "table": table,
        "assertions": {
            "f_strictly_decreasing": table.f_strictly_decreasing,
            "energy_strictly_decreasing": table.energy_strictly_decreasing,
            "grad_norm_increasing": table.grad_norm_increasing,
            "identity_gap_max": max_gap,
        },
    });
    output::write_report(&out_dir.join("report.json"), &report)?;
    if !(table.f_strictly_decreasing && table.energy_strictly_decreasing && table.grad_norm_increasing)
    {
        return Ok(Outcome::fail("monotone divergence trends violated".into()));
    }
    if max_gap > 1e-6 {
        return Ok(Outcome::fail(format!("energy decomposition gap {max_gap:e} above 1e-6")));
    }
    Ok(Outcome::ok())
}

fn grid_saturated(u: &Field, mass: f64, grid: &Arc<Grid>) -> bool {
    let vol_min = grid.volumes().iter().copied().fold(f64::INFINITY, f64::min);
    ops::sup_norm(u) * vol_min >= 0.5 * mass
}

struct SweepRun {
    record: serde_json::Value,
    error: Option<String>,
}

pub fn sweep(cfg: &RunConfig, out_dir: &Path) -> anyhow::Result<Outcome> {
    if cfg.masses.is_empty() {
        anyhow::bail!("sweep needs a nonempty masses list");
    }
    let grid = build_grid(cfg)?;
    let radial = matches!(grid.kind(), GridKind::RadialDisk { .. });
    let general = core::general_threshold_mass(cfg.params.diff);
    let radial_threshold = core::radial_threshold_mass(cfg.params.diff);
    let threshold = if radial { radial_threshold } else { general };

    // Independent single-threaded runs, merged in mass order.
    let mut results: Vec<Option<SweepRun>> = Vec::new();
    results.resize_with(cfg.masses.len(), || None);
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for (i, &mass) in cfg.masses.iter().enumerate() {
            let grid = Arc::clone(&grid);
            let cfg_ref = &*cfg;
            handles.push((
                i,
                scope.spawn(move || {
                    sweep_one(cfg_ref, &grid, mass, threshold, general, radial)
                }),
            ));
        }
        for (i, h) in handles {
            results[i] = Some(h.join().expect("sweep worker panicked"));
        }
    });
    let results: Vec<SweepRun> = results.into_iter().map(|r| r.expect("filled")).collect();

    let any_error = results.iter().any(|r| r.error.is_some());
    let records: Vec<&serde_json::Value> = results.iter().map(|r| &r.record).collect();
    let report = json!({
        "schema_version": crate::config::SCHEMA_VERSION,
        "experiment": "threshold_sweep",
        "config_hash": cfg.hash(),
        "grid_is_radial": radial,
        "threshold_general": general,
        "threshold_radial": radial_threshold,
        "records": records,
        "errors": results.iter().filter_map(|r| r.error.clone()).collect::<Vec<_>>(),
    });
    output::write_report(&out_dir.join("report.json"), &report)?;
    if any_error {
        anyhow::bail!("one or more sweep runs failed; partial report written");
    }
    Ok(Outcome::ok())
}

fn sweep_one(
    cfg: &RunConfig,
    grid: &Arc<Grid>,
    mass: f64,
    threshold: f64,
    general: f64,
    radial: bool,
) -> SweepRun {
    let mut mass_cfg = cfg.clone();
    mass_cfg.initial.set_mass(mass);
    let hash = mass_cfg.hash();
    match sweep_run_inner(cfg, grid, mass, threshold, general, radial, &hash) {
        Ok(record) => SweepRun { record, error: None },
        Err(e) => SweepRun {
            record: json!({
                "mass": mass,
                "verdict": "error",
                "error": e.to_string(),
                "config_hash": hash,
            }),
            error: Some(format!("mass {mass}: {e}")),
        },
    }
}

fn sweep_run_inner(
    cfg: &RunConfig,
    grid: &Arc<Grid>,
    mass: f64,
    threshold: f64,
    general: f64,
    radial: bool,
    hash: &str,
) -> anyhow::Result<serde_json::Value> {
    let p = &cfg.params;
    let knobs = &cfg.sweep;
    let omega = grid.domain_volume();

    let mut flags: Vec<String> = Vec::new();
    // Hypothesis flags for the stationary-landscape theory.
    if !radial {
        let q = mass / general;
        if (q - q.round()).abs() <= 1e-9 * q.max(1.0) && q.round() >= 1.0 {
            flags.push("outside_theory_mass_multiple_of_general_threshold".into());
        }
    } else if mass >= general && mass <= core::radial_threshold_mass(p.diff) {
        flags.push("ambiguous_regime_for_general_theory".into());
    }

    // Unbounded-side runs start from the concentration family, with the
    // energy precondition checked against the sampled stationary bound.
    let above = mass > threshold;
    let (initial, e_in, bound) = if above {
        let data = core::build_theta_eta(
            &ThetaEtaSpec { eta: knobs.eta, anchor: None, mass },
            p,
            grid,
        )?;
        let e_in = energy(&data.state, p).e;
        let mut seeds = vec![Field::constant(grid, mass / (p.delta * omega))];
        for &w in &cfg.stationary.seed_widths {
            seeds.push(core::build_bump(mass, [0.0, 0.0], w, p, grid)?.w);
        }
        let est = estimate_mu_m(
            mass,
            p,
            &seeds,
            cfg.stationary.damping,
            cfg.stationary.tol,
            cfg.stationary.max_iters,
        )?;
        let resolved = est
            .states
            .iter()
            .filter(|s| !grid_saturated(&s.u_star, mass, grid))
            .map(|s| s.energy)
            .fold(f64::INFINITY, f64::min);
        if !(e_in < resolved - knobs.energy_margin) {
            flags.push("energy_precondition_unmet".into());
        }
        (data.state, Some(e_in), Some(resolved))
    } else {
        let width = match cfg.initial {
            InitialSpec::Bump { width, .. } => width,
            _ => 0.5,
        };
        (core::build_bump(mass, [0.0, 0.0], width, p, grid)?, None, None)
    };

    let mut step = cfg.step;
    step.adaptive_cfl = true;
    let traj = run(&initial, p, &step)?;
    if traj.min_u < 0.0 || traj.min_v < 0.0 {
        anyhow::bail!("negative cell values in sweep run at mass {mass}");
    }

    let sup0 = traj.diagnostics[0].sup_u;
    let sup_max = traj.diagnostics.iter().map(|d| d.sup_u).fold(0.0, f64::max);
    let amplification = sup_max / sup0;
    let capped = matches!(traj.termination, Termination::GrowthCapReached { .. });
    let n = traj.diagnostics.len();
    let tail = &traj.diagnostics[n.saturating_sub((n / 5).max(2))..];
    let tail_dt = tail.last().unwrap().time - tail[0].time;
    let plateau_slope = if tail_dt > 0.0 {
        (tail.last().unwrap().energy_e - tail[0].energy_e) / tail_dt
    } else {
        0.0
    };
    let still_increasing = tail.last().unwrap().sup_u > tail[0].sup_u;

    let verdict = if capped {
        "cap-reached"
    } else if amplification >= knobs.growing_amplification && still_increasing {
        "growing"
    } else if amplification <= knobs.bounded_amplification
        && plateau_slope.abs() <= knobs.plateau_slope
    {
        "bounded-like"
    } else {
        "indeterminate"
    };

    Ok(json!({
        "mass": mass,
        "mass_over_threshold": mass / threshold,
        "sup_u_over_time": sup_max,
        "amplification": amplification,
        "final_energy": traj.diagnostics.last().unwrap().energy_e,
        "plateau_slope": plateau_slope,
        "verdict": verdict,
        "flags": flags,
        "initial_energy": e_in,
        "sampled_stationary_bound": bound,
        "termination": traj.termination,
        "config_hash": hash,
    }))
}

pub fn dispatch(cfg: &RunConfig, out_dir: &Path) -> anyhow::Result<Outcome> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    // Persist the exact configuration next to the outputs.
    let cfg_json = serde_json::to_value(cfg)?;
    output::write_report(&out_dir.join("config.json"), &cfg_json)?;
    match cfg.experiment {
        ExperimentKind::Simulate => simulate(cfg, out_dir),
        ExperimentKind::EnergyCheck => energy_check(cfg, out_dir),
        ExperimentKind::Stationary => stationary(cfg, out_dir),
        ExperimentKind::ThetaProbe => theta_probe(cfg, out_dir),
        ExperimentKind::ThresholdSweep => sweep(cfg, out_dir),
    }
}

/// Guard against misuse of variant-specific experiments.
pub fn check_variant_compat(cfg: &RunConfig) -> anyhow::Result<()> {
    if matches!(cfg.experiment, ExperimentKind::Stationary | ExperimentKind::ThetaProbe)
        && cfg.params.variant == Variant::EllipticMeanZero
    {
        anyhow::bail!(
            "the stationary problem and the concentration probe need a degrading signal \
             (variant a1 or twd with delta > 0)"
        );
    }
    Ok(())
}
