//! Experiment harness for the indirect-signal chemotaxis laboratory.
//!
//! Exit codes: 0 on success, 2 when an experiment assertion fails (an
//! invariant the run was supposed to certify does not hold), 1 on
//! operational errors (bad input, IO, solver breakdown).

mod config;
mod experiments;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chemotaxis_core::GridKind;
use config::{ExperimentKind, InitialSpec, RunConfig};

#[derive(Parser)]
#[command(
    name = "chemotaxis",
    about = "Finite-volume laboratory for a 2D chemotaxis system with indirect signal production",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// JSON run configuration; omitted fields fall back to the experiment template.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the time step.
    #[arg(long)]
    dt: Option<f64>,
    /// Override the final time / horizon.
    #[arg(long, value_name = "T")]
    t_end: Option<f64>,
    /// Override the cell count (radial cells, or both rectangle directions).
    #[arg(long, value_name = "N")]
    grid_n: Option<usize>,
    /// Override the initial mass M.
    #[arg(long)]
    mass: Option<f64>,
    /// Override the concentration scale eta.
    #[arg(long)]
    eta: Option<f64>,
    /// Model variant: a1 (fully parabolic), tw (elliptic mean-zero), twd (elliptic degradation).
    #[arg(long)]
    variant: Option<String>,
    /// Seed for randomized initial data.
    #[arg(long)]
    seed: Option<u64>,
    /// Write field snapshots next to the diagnostics.
    #[arg(long)]
    write_fields: bool,
    /// Print the effective configuration and exit without running.
    #[arg(long)]
    print_config: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Advance the system and write per-output-time diagnostics.
    Simulate(CommonOpts),
    /// Verify the discrete energy identity across a ladder of time steps.
    #[command(name = "energy-check")]
    EnergyCheck(CommonOpts),
    /// Solve the nonlocal stationary problem from a family of seeds.
    Stationary(CommonOpts),
    /// Tabulate the reduced energy of the concentration family.
    #[command(name = "theta-probe")]
    ThetaProbe(CommonOpts),
    /// Classify bounded vs growing behavior across a list of masses.
    Sweep(CommonOpts),
}

fn load_config(kind: ExperimentKind, opts: &CommonOpts) -> anyhow::Result<RunConfig> {
    let mut cfg = match &opts.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
            let cfg: RunConfig = serde_json::from_str(&text)
                .map_err(|e| anyhow::anyhow!("parsing {}: {e}", path.display()))?;
            if cfg.experiment != kind {
                anyhow::bail!(
                    "config is for {:?} but the {:?} subcommand was invoked",
                    cfg.experiment,
                    kind
                );
            }
            cfg
        }
        None => RunConfig::template(kind),
    };

    if let Some(dt) = opts.dt {
        cfg.step.dt = dt;
    }
    if let Some(t) = opts.t_end {
        cfg.step.t_end = t;
    }
    if let Some(n) = opts.grid_n {
        cfg.grid = match cfg.grid {
            GridKind::RadialDisk { radius, .. } => GridKind::RadialDisk { radius, cells: n },
            GridKind::AnchoredDisk { radius, .. } => GridKind::AnchoredDisk { radius, cells: n },
            GridKind::Rect2D { lx, ly, .. } => GridKind::Rect2D { lx, ly, nx: n, ny: n },
        };
    }
    if let Some(m) = opts.mass {
        cfg.initial.set_mass(m);
    }
    if let Some(eta) = opts.eta {
        if let InitialSpec::ThetaEta { eta: e, .. } = &mut cfg.initial {
            *e = eta;
        }
        cfg.sweep.eta = eta;
        if !cfg.etas.is_empty() {
            cfg.etas = vec![eta];
        }
    }
    if let Some(v) = &opts.variant {
        cfg.params.variant = v.parse()?;
    }
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    if opts.write_fields {
        cfg.write_fields = true;
    }
    cfg.validate()?;
    experiments::check_variant_compat(&cfg)?;
    Ok(cfg)
}

fn run_command(kind: ExperimentKind, opts: &CommonOpts) -> anyhow::Result<bool> {
    let cfg = load_config(kind, opts)?;
    if opts.print_config {
        println!("{}", serde_json::to_string_pretty(&cfg)?);
        return Ok(true);
    }
    let outcome = experiments::dispatch(&cfg, &opts.out)?;
    if outcome.assertions_ok {
        println!("ok: report written to {}", opts.out.display());
        Ok(true)
    } else {
        for f in &outcome.failures {
            eprintln!("assertion failed: {f}");
        }
        eprintln!("report written to {}", opts.out.display());
        Ok(false)
    }
}

fn main() -> ExitCode {
    // Usage problems are operational errors (exit 1); the exit code 2 is
    // reserved for experiment assertion failures.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e)
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    let (kind, opts) = match &cli.command {
        Command::Simulate(o) => (ExperimentKind::Simulate, o),
        Command::EnergyCheck(o) => (ExperimentKind::EnergyCheck, o),
        Command::Stationary(o) => (ExperimentKind::Stationary, o),
        Command::ThetaProbe(o) => (ExperimentKind::ThetaProbe, o),
        Command::Sweep(o) => (ExperimentKind::ThresholdSweep, o),
    };
    match run_command(kind, opts) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
