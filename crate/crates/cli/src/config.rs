//! Run configuration: a single versioned JSON document that fully
//! reproduces a run (grid, parameters, initial data, stepping, experiment
//! knobs, seed). The report carries the SHA-256 of the canonical form.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use chemotaxis_core::{GridKind, ModelParams, StepConfig, Variant};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Simulate,
    EnergyCheck,
    Stationary,
    ThetaProbe,
    ThresholdSweep,
}

/// Initial-data selector.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialSpec {
    Constant { mass: f64 },
    Bump { mass: f64, center: [f64; 2], width: f64 },
    CosineBump { mass: f64, amplitude: f64, v_scale: f64, v_amplitude: f64 },
    ThetaEta { mass: f64, eta: f64, anchor: Option<[f64; 2]> },
    Random { mass: f64, amplitude: f64 },
}

impl InitialSpec {
    pub fn mass(&self) -> f64 {
        match self {
            InitialSpec::Constant { mass }
            | InitialSpec::Bump { mass, .. }
            | InitialSpec::CosineBump { mass, .. }
            | InitialSpec::ThetaEta { mass, .. }
            | InitialSpec::Random { mass, .. } => *mass,
        }
    }

    pub fn set_mass(&mut self, m: f64) {
        match self {
            InitialSpec::Constant { mass }
            | InitialSpec::Bump { mass, .. }
            | InitialSpec::CosineBump { mass, .. }
            | InitialSpec::ThetaEta { mass, .. }
            | InitialSpec::Random { mass, .. } => *mass = m,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StationaryKnobs {
    pub damping: f64,
    pub tol: f64,
    pub max_iters: usize,
    /// Widths of the bump-shaped signal seeds tried besides the constant.
    pub seed_widths: Vec<f64>,
}

impl Default for StationaryKnobs {
    fn default() -> Self {
        StationaryKnobs { damping: 0.5, tol: 1e-10, max_iters: 5000, seed_widths: vec![0.5] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepKnobs {
    /// Amplification at or below which a completed run is bounded-like.
    pub bounded_amplification: f64,
    /// Amplification at or above which a still-growing run is growing.
    pub growing_amplification: f64,
    /// |dE/dt| over the final fifth of the horizon below which the energy
    /// counts as plateaued.
    pub plateau_slope: f64,
    /// Required gap between the concentration data's initial energy and the
    /// sampled stationary bound.
    pub energy_margin: f64,
    /// Concentration scale for unbounded-side initial data.
    pub eta: f64,
}

impl Default for SweepKnobs {
    fn default() -> Self {
        SweepKnobs {
            bounded_amplification: 2.0,
            growing_amplification: 10.0,
            plateau_slope: 1e-4,
            energy_margin: 10.0,
            eta: 0.25,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub schema_version: u32,
    pub experiment: ExperimentKind,
    pub params: ModelParams,
    pub grid: GridKind,
    pub initial: InitialSpec,
    pub step: StepConfig,
    /// Seed for randomized initial data and randomized invariant suites.
    pub seed: u64,
    /// Write field snapshots (`fields/*.bin` plus sidecar) at output times.
    pub write_fields: bool,
    /// Time-step ladder for the energy-identity check.
    pub dt_levels: Vec<f64>,
    /// Concentration scales for the theta probe (strictly decreasing).
    pub etas: Vec<f64>,
    /// Masses for the threshold sweep.
    pub masses: Vec<f64>,
    #[serde(default)]
    pub stationary: StationaryKnobs,
    #[serde(default)]
    pub sweep: SweepKnobs,
}

impl RunConfig {
    /// A reasonable default configuration per experiment kind.
    pub fn template(experiment: ExperimentKind) -> RunConfig {
        let params = ModelParams {
            nu: 1.0,
            eps: 0.5,
            diff: 1.0,
            delta: 1.0,
            variant: Variant::FullyParabolic,
        };
        let mut step = StepConfig::new(1e-3, 1.0);
        step.output_every = 100;
        step.adaptive_cfl = true;
        let mass = 2.0 * std::f64::consts::PI;
        let mut cfg = RunConfig {
            schema_version: SCHEMA_VERSION,
            experiment,
            params,
            grid: GridKind::RadialDisk { radius: 1.0, cells: 128 },
            initial: InitialSpec::Bump { mass, center: [0.0, 0.0], width: 0.5 },
            step,
            seed: 42,
            write_fields: false,
            dt_levels: vec![4e-4, 2e-4, 1e-4],
            etas: vec![0.4, 0.2, 0.1, 0.05],
            masses: vec![],
            stationary: StationaryKnobs::default(),
            sweep: SweepKnobs::default(),
        };
        match experiment {
            ExperimentKind::EnergyCheck => {
                cfg.params = ModelParams {
                    nu: 0.5,
                    eps: 0.25,
                    diff: 1.0,
                    delta: 1.0,
                    variant: Variant::FullyParabolic,
                };
                cfg.grid = GridKind::RadialDisk { radius: 1.0, cells: 256 };
                // Boundary-compatible ripple with an opposite-phase settled
                // field: strong relaxation transient, tiny stencil-mismatch
                // floor — passes the order gate for all three variants.
                cfg.initial = InitialSpec::CosineBump {
                    mass,
                    amplitude: 0.1,
                    v_scale: 0.5,
                    v_amplitude: 0.3,
                };
                cfg.step.t_end = 0.1;
            }
            ExperimentKind::ThetaProbe => {
                cfg.grid = GridKind::AnchoredDisk { radius: 1.0, cells: 512 };
                cfg.params.delta = 0.5;
                cfg.initial = InitialSpec::ThetaEta {
                    mass: 1.2 * chemotaxis_core::general_threshold_mass(1.0),
                    eta: 0.2,
                    anchor: None,
                };
            }
            ExperimentKind::ThresholdSweep => {
                cfg.params.delta = 2.0;
                cfg.step.t_end = 50.0;
                cfg.step.output_every = 500;
                cfg.step.sup_cap = 5e4;
                let radial = chemotaxis_core::radial_threshold_mass(1.0);
                cfg.masses = vec![0.5 * radial, 2.0 * radial];
                cfg.stationary.seed_widths = vec![1.5];
            }
            ExperimentKind::Stationary => {
                cfg.grid = GridKind::RadialDisk { radius: 1.0, cells: 256 };
            }
            ExperimentKind::Simulate => {}
        }
        cfg
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            anyhow::bail!(
                "unsupported schema_version {} (this build reads {})",
                self.schema_version,
                SCHEMA_VERSION
            );
        }
        self.params.validate()?;
        self.step.validate()?;
        if !(self.initial.mass() > 0.0) {
            anyhow::bail!("initial mass must be positive");
        }
        Ok(())
    }

    /// SHA-256 of the canonical (serialized) form; recorded in every report
    /// so outputs are traceable to their exact configuration.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
