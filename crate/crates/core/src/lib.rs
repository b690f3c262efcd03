//! A finite-volume laboratory for a two-dimensional chemotaxis system with
//! indirect signal production.
//!
//! The model couples a moving population `u` (transported by diffusion and
//! by drift up the gradient of a signal `w`), a settled population `v` fed
//! by `u`, and the signal `w` produced by `v` — not by `u` itself, which is
//! what makes the signal production *indirect*. Three signal closures are
//! supported: fully parabolic, quasi-stationary with mean-zero gauge, and
//! quasi-stationary with degradation.
//!
//! The crate provides:
//!
//! * conservative discrete operators with exact summation-by-parts duality
//!   ([`ops`]),
//! * the free energy / dissipation pair and the closed-form L1 laws
//!   ([`functionals`]),
//! * mass-conservative, positivity-preserving IMEX time stepping with
//!   energy-identity verification ([`dynamics`]),
//! * the nonlocal stationary problem `-D Lap w + delta w = M e^w/||e^w||_1`
//!   and its sampled energy landscape ([`stationary`]),
//! * initial-data builders, including the logarithmically concentrating
//!   profiles whose reduced energy diverges to `-infinity` and which seed
//!   unbounded trajectories above the critical mass ([`initdata`]).
//!
//! The mass thresholds `4*pi*D` (general domains) and `8*pi*D` (radially
//! symmetric disk data) separate bounded relaxation from unbounded
//! aggregation; the harness crate drives sweep experiments across them.

pub mod dynamics;
pub mod error;
pub mod functionals;
pub mod grid;
pub mod initdata;
pub mod linalg;
pub mod ops;
pub mod params;
pub mod state;
pub mod stationary;

pub use dynamics::{
    diagnose, energy_identity_check, run, step, EnergyCheckReport, StepConfig, Stepper,
    Termination, Trajectory,
};
pub use error::{Error, Result};
pub use functionals::{
    closed_form_mass_v, closed_form_mass_w, dissipation, energy, energy_lower_bound,
    entropy_density, f_functional, f_functional_offset, EnergyReport,
};
pub use grid::{Field, Grid, GridKind};
pub use initdata::{
    build_bump, build_constant, build_cosine_bump, build_random, build_theta_eta,
    energy_divergence_probe,
    ProbeRow, ProbeTable, ThetaData, ThetaEtaSpec,
};
pub use params::{ModelParams, Variant};
pub use state::{Diagnostics, State};
pub use stationary::{
    estimate_mu_m, solve_stationary, solve_stationary_best_effort, verify_stationary_under_flow,
    DriftReport, MuEstimate, StationaryState,
};

/// The critical mass `4*pi*D` of the general-domain theory.
pub fn general_threshold_mass(diff: f64) -> f64 {
    4.0 * std::f64::consts::PI * diff
}

/// The critical mass `8*pi*D` of the radially symmetric disk theory.
pub fn radial_threshold_mass(diff: f64) -> f64 {
    8.0 * std::f64::consts::PI * diff
}
