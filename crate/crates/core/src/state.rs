//! Simulation state and per-output-time diagnostics.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::params::Variant;

/// The triple of cell-averaged fields at one time: `u` (moving cells),
/// `v` (settled cells), `w` (signal).
#[derive(Debug, Clone)]
pub struct State {
    pub u: Field,
    pub v: Field,
    pub w: Field,
    pub time: f64,
}

impl State {
    pub fn new(u: Field, v: Field, w: Field, time: f64) -> Result<State> {
        if u.len() != v.len() || u.len() != w.len() {
            return Err(Error::GridMismatch(format!(
                "state fields disagree in size: u {}, v {}, w {}",
                u.len(),
                v.len(),
                w.len()
            )));
        }
        Ok(State { u, v, w, time })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.u.grid()
    }

    /// Sign and finiteness invariants: `u >= 0` and `v >= 0` always,
    /// `w >= 0` for the variants whose signal carries a sign (the mean-zero
    /// variant pins `<w> = 0` instead and `w` may be signed).
    pub fn validate(&self, variant: Variant) -> Result<()> {
        for (name, f) in [("u", &self.u), ("v", &self.v), ("w", &self.w)] {
            if !f.is_finite() {
                return Err(Error::NonFinite { field: state_field_name(name), time: self.time });
            }
        }
        if self.u.min() < 0.0 {
            return Err(Error::NegativeInput(format!("u has min {:e}", self.u.min())));
        }
        if self.v.min() < 0.0 {
            return Err(Error::NegativeInput(format!("v has min {:e}", self.v.min())));
        }
        if variant.signal_nonnegative() && self.w.min() < 0.0 {
            return Err(Error::NegativeInput(format!("w has min {:e}", self.w.min())));
        }
        Ok(())
    }
}

fn state_field_name(name: &str) -> &'static str {
    match name {
        "u" => "u",
        "v" => "v",
        _ => "w",
    }
}

/// One diagnostics record along a trajectory.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Diagnostics {
    pub time: f64,
    pub mass_u: f64,
    pub mass_v: f64,
    pub mass_w: f64,
    pub energy_e0: f64,
    pub energy_e: f64,
    pub dissipation: f64,
    pub sup_u: f64,
    pub sup_v: f64,
    pub w_h1_norm: f64,
}
