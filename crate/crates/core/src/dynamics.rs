//! Time integration: first-order IMEX stepping that conserves the cell mass
//! exactly and preserves nonnegativity in floating point.
//!
//! One step of the fully parabolic variant, in order:
//!
//! 1. signal update, implicit in `w` with the old `v` as source:
//!    `(nu/dt + delta - D Lap_h) w_new = (nu/dt) w_old + v_old`;
//! 2. settling update by the exact integrating factor of
//!    `nu*eps dt_v = u - v` with `u` frozen over the step:
//!    `v_new = a v_old + (1-a) u_old`, `a = exp(-dt/(nu*eps))`
//!    (a convex combination, so nonnegativity survives roundoff);
//! 3. transport update: implicit central diffusion, explicit first-order
//!    upwind advection against the *fresh* signal:
//!    `(1/dt - Lap_h) u_new = u_old/dt - div_h(upwind(u_old) grad_h w_new)`.
//!
//! The advective right-hand side is accumulated in donor form
//! `u_i (1 - out_i) + in_i`, which is nonnegative in floating point whenever
//! the advective CFL number `out_i <= 1`; that number is checked every step
//! and on request the step bisects itself until it passes. The implicit
//! solves are direct M-matrix solves, so positivity propagates; the flux
//! form telescopes, so `int u` is conserved to roundoff regardless of step
//! count.
//!
//! The quasi-stationary variants replace step 1 by the elliptic slaving of
//! `w` to the fresh `v` (mean-zero or degradation form) and are otherwise
//! identical.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{self};
use crate::grid::{Field, Grid};
use crate::linalg::Solvers;
use crate::ops;
use crate::params::{ModelParams, Variant};
use crate::state::{Diagnostics, State};
use std::sync::Arc;

/// Deepest step bisection allowed before a CFL violation becomes an error.
const MAX_BISECT_DEPTH: u32 = 24;

/// Time-stepping configuration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StepConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Record diagnostics every this many steps (plus start and end).
    pub output_every: usize,
    /// Post-solve residual tolerance for the elliptic signal solves.
    pub linear_tol: f64,
    /// Reserved for iterative backends; the solvers in this build are direct.
    pub max_linear_iters: usize,
    /// Bisect the step when the advective CFL check fails instead of erroring.
    pub adaptive_cfl: bool,
    /// Abort threshold on `sup u`; reaching it ends the run with a
    /// `GrowthCapReached` verdict rather than an error.
    pub sup_cap: f64,
    /// Keep full field snapshots at output times.
    pub store_snapshots: bool,
}

impl StepConfig {
    pub fn new(dt: f64, t_end: f64) -> StepConfig {
        StepConfig {
            dt,
            t_end,
            output_every: 1,
            linear_tol: 1e-12,
            max_linear_iters: 0,
            adaptive_cfl: false,
            sup_cap: 1e8,
            store_snapshots: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.t_end > 0.0) {
            return Err(Error::InvalidParams(format!(
                "dt and t_end must be positive, got dt = {}, t_end = {}",
                self.dt, self.t_end
            )));
        }
        if self.output_every == 0 {
            return Err(Error::InvalidParams("output_every must be at least 1".into()));
        }
        if !(self.linear_tol > 0.0) {
            return Err(Error::InvalidParams("linear_tol must be positive".into()));
        }
        if !(self.sup_cap > 0.0) {
            return Err(Error::InvalidParams("sup_cap must be positive".into()));
        }
        Ok(())
    }
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Termination {
    Completed,
    GrowthCapReached { time: f64 },
}

/// Everything a run produces.
#[derive(Debug)]
pub struct Trajectory {
    pub diagnostics: Vec<Diagnostics>,
    pub snapshots: Vec<State>,
    pub final_state: State,
    pub termination: Termination,
    /// Outer steps actually taken (bisected sub-steps not counted; fewer
    /// than planned when the growth cap fires).
    pub steps: u64,
    /// Sub-steps actually executed, including bisections.
    pub substeps: u64,
    /// Global minima over every executed sub-step (positivity audit;
    /// `min_w` is meaningful for the variants whose signal carries a sign).
    pub min_u: f64,
    pub min_v: f64,
    pub min_w: f64,
}

#[derive(Debug, Default)]
struct StepAudit {
    min_u: f64,
    min_v: f64,
    min_w: f64,
    substeps: u64,
}

/// Reusable stepper: owns the per-grid solver context.
pub struct Stepper {
    params: ModelParams,
    linear_tol: f64,
    adaptive_cfl: bool,
    solvers: Solvers,
}

impl Stepper {
    pub fn new(grid: &Arc<Grid>, params: &ModelParams, cfg: &StepConfig) -> Result<Stepper> {
        params.validate()?;
        cfg.validate()?;
        Ok(Stepper {
            params: *params,
            linear_tol: cfg.linear_tol,
            adaptive_cfl: cfg.adaptive_cfl,
            solvers: Solvers::new(grid),
        })
    }

    /// Slave the signal to the current `v` for the quasi-stationary
    /// variants (no-op for the fully parabolic one). Called once at the
    /// start of a run so the initial state is variant-consistent.
    pub fn slave_signal(&self, state: &State) -> Result<State> {
        match self.params.variant {
            Variant::FullyParabolic => Ok(state.clone()),
            Variant::EllipticMeanZero => {
                let w = self.solve_mean_zero_signal(&state.v)?;
                State::new(state.u.clone(), state.v.clone(), w, state.time)
            }
            Variant::EllipticDegradation => {
                let w = self.solve_degradation_signal(&state.v)?;
                State::new(state.u.clone(), state.v.clone(), w, state.time)
            }
        }
    }

    fn solve_mean_zero_signal(&self, v: &Field) -> Result<Field> {
        let mv = ops::mean(v);
        let g = v.map(|x| mv - x);
        self.solvers.poisson_mean_zero(self.params.diff, &g)
    }

    fn solve_degradation_signal(&self, v: &Field) -> Result<Field> {
        self.solvers.helmholtz(self.params.delta, self.params.diff, v, self.linear_tol)
    }

    /// Advance one step of `dt`, bisecting on CFL failure when configured.
    pub fn step(&self, state: &State, dt: f64) -> Result<State> {
        let mut audit = StepAudit {
            min_u: f64::INFINITY,
            min_v: f64::INFINITY,
            min_w: f64::INFINITY,
            substeps: 0,
        };
        self.step_audited(state, dt, &mut audit)
    }

    fn step_audited(&self, state: &State, dt: f64, audit: &mut StepAudit) -> Result<State> {
        self.step_recursive(state, dt, 0, audit)
    }

    fn step_recursive(
        &self,
        state: &State,
        dt: f64,
        depth: u32,
        audit: &mut StepAudit,
    ) -> Result<State> {
        let attempt = match self.params.variant {
            Variant::FullyParabolic => self.try_step_fully_parabolic(state, dt),
            Variant::EllipticMeanZero => self.try_step_elliptic(state, dt, false),
            Variant::EllipticDegradation => self.try_step_elliptic(state, dt, true),
        }?;
        match attempt {
            StepOutcome::Done(next) => {
                audit.substeps += 1;
                audit.min_u = audit.min_u.min(next.u.min());
                audit.min_v = audit.min_v.min(next.v.min());
                audit.min_w = audit.min_w.min(next.w.min());
                Ok(next)
            }
            StepOutcome::CflExceeded(ratio) => {
                if self.adaptive_cfl && depth < MAX_BISECT_DEPTH {
                    let half = self.step_recursive(state, 0.5 * dt, depth + 1, audit)?;
                    self.step_recursive(&half, 0.5 * dt, depth + 1, audit)
                } else {
                    Err(Error::CflViolation { time: state.time, ratio })
                }
            }
        }
    }

    fn try_step_fully_parabolic(&self, state: &State, dt: f64) -> Result<StepOutcome> {
        let p = &self.params;
        // (i) implicit signal update with the old v as source.
        let b_w = Field::from_fn(state.grid(), |i| p.nu / dt * state.w[i] + state.v[i]);
        let w_new = self.solvers.helmholtz_positive(p.nu / dt + p.delta, p.diff, &b_w);
        // CFL against the fresh signal before committing to the transport.
        let (out_coef, inflow, cfl) = donor_fluxes(&state.u, &w_new, dt);
        if cfl > 1.0 {
            return Ok(StepOutcome::CflExceeded(cfl));
        }
        // (ii) exact integrating factor for v.
        let v_new = exact_settling_update(&state.u, &state.v, dt, p);
        // (iii) implicit diffusion, explicit donor-form advection.
        let u_new = self.transport_update(&state.u, out_coef, inflow, dt);
        Ok(StepOutcome::Done(State::new(u_new, v_new, w_new, state.time + dt)?))
    }

    fn try_step_elliptic(&self, state: &State, dt: f64, degradation: bool) -> Result<StepOutcome> {
        let p = &self.params;
        let v_new = exact_settling_update(&state.u, &state.v, dt, p);
        let w_new = if degradation {
            self.solve_degradation_signal(&v_new)?
        } else {
            self.solve_mean_zero_signal(&v_new)?
        };
        let (out_coef, inflow, cfl) = donor_fluxes(&state.u, &w_new, dt);
        if cfl > 1.0 {
            return Ok(StepOutcome::CflExceeded(cfl));
        }
        let u_new = self.transport_update(&state.u, out_coef, inflow, dt);
        Ok(StepOutcome::Done(State::new(u_new, v_new, w_new, state.time + dt)?))
    }

    fn transport_update(&self, u: &Field, out_coef: Vec<f64>, inflow: Vec<f64>, dt: f64) -> Field {
        let b = Field::from_fn(u.grid(), |i| (u[i] * (1.0 - out_coef[i]) + inflow[i]) / dt);
        self.solvers.helmholtz_positive(1.0 / dt, 1.0, &b)
    }

    /// Largest per-cell advective outflow number `dt * sum tau |dw| / vol`
    /// for the current state; must stay at or below 1 for the donor update
    /// to be a convex combination.
    pub fn cfl_number(&self, state: &State, dt: f64) -> f64 {
        donor_fluxes(&state.u, &state.w, dt).2
    }
}

enum StepOutcome {
    Done(State),
    CflExceeded(f64),
}

/// `v_new = a v + (1-a) u` with `a = exp(-dt/(nu*eps))`.
fn exact_settling_update(u: &Field, v: &Field, dt: f64, p: &ModelParams) -> Field {
    let a = (-dt / (p.nu * p.eps)).exp();
    Field::from_fn(u.grid(), |i| a * v[i] + (1.0 - a) * u[i])
}

/// Donor-cell bookkeeping for the explicit advection: per cell the outflow
/// coefficient `dt/vol * sum tau |dw|` over faces where it is the donor,
/// the inflow `dt/vol * sum tau |dw| u_donor` over faces where it receives,
/// and the largest outflow coefficient (the CFL number).
fn donor_fluxes(u: &Field, w: &Field, dt: f64) -> (Vec<f64>, Vec<f64>, f64) {
    let grid = u.grid();
    let n = grid.num_cells();
    let uv = u.values();
    let wv = w.values();
    let vols = grid.volumes();
    let mut out_coef = vec![0.0; n];
    let mut inflow = vec![0.0; n];
    for fc in grid.faces() {
        let dw = wv[fc.right] - wv[fc.left];
        if dw == 0.0 {
            continue;
        }
        let rate = fc.trans * dw.abs();
        let (donor, receiver, u_don) =
            if dw > 0.0 { (fc.left, fc.right, uv[fc.left]) } else { (fc.right, fc.left, uv[fc.right]) };
        out_coef[donor] += dt * rate / vols[donor];
        inflow[receiver] += dt * rate * u_don / vols[receiver];
    }
    let cfl = out_coef.iter().copied().fold(0.0, f64::max);
    (out_coef, inflow, cfl)
}

/// Per-record diagnostics. `prev` carries the previous output signal and
/// the elapsed time since it, used to realize the signal rate of the
/// quasi-stationary dissipations as a difference quotient; with no previous
/// record only the transport term is reported for those variants.
pub fn diagnose(state: &State, params: &ModelParams, prev: Option<(&Field, f64)>) -> Diagnostics {
    let rep = functionals::energy(state, params);
    let dissipation = match params.variant {
        Variant::FullyParabolic => functionals::dissipation(state, params),
        _ => match prev {
            Some((w_old, dt)) => functionals::variant_step_dissipation(state, w_old, dt, params),
            None => functionals::transport_dissipation(&state.u, &state.w),
        },
    };
    Diagnostics {
        time: state.time,
        mass_u: ops::l1_norm(&state.u),
        mass_v: ops::l1_norm(&state.v),
        mass_w: ops::l1_norm(&state.w),
        energy_e0: rep.e0,
        energy_e: rep.e,
        dissipation,
        sup_u: state.u.max(),
        sup_v: state.v.max(),
        w_h1_norm: (ops::l2_norm_sq(&state.w) + ops::gradient_sq_norm(&state.w)).sqrt(),
    }
}

/// Advance `initial` to `cfg.t_end`, recording diagnostics every
/// `cfg.output_every` steps (plus start and end). Aborts cleanly with a
/// `GrowthCapReached` verdict when `sup u` crosses `cfg.sup_cap`; NaN or
/// negative fields abort with an error.
pub fn run(initial: &State, params: &ModelParams, cfg: &StepConfig) -> Result<Trajectory> {
    let stepper = Stepper::new(initial.grid(), params, cfg)?;
    initial.validate(params.variant)?;
    let mut state = stepper.slave_signal(initial)?;
    state.validate(params.variant)?;

    let n_steps = (cfg.t_end / cfg.dt).round().max(1.0) as u64;
    let mut audit = StepAudit {
        min_u: state.u.min(),
        min_v: state.v.min(),
        min_w: state.w.min(),
        substeps: 0,
    };

    let mut diagnostics = Vec::new();
    let mut snapshots = Vec::new();
    diagnostics.push(diagnose(&state, params, None));
    if cfg.store_snapshots {
        snapshots.push(state.clone());
    }

    let mut last_output_w = state.w.clone();
    let mut last_output_time = state.time;
    let mut termination = Termination::Completed;
    let mut steps_taken = 0u64;

    for step_index in 1..=n_steps {
        let next = stepper.step_audited(&state, cfg.dt, &mut audit)?;
        for (name, f) in [("u", &next.u), ("v", &next.v), ("w", &next.w)] {
            if !f.is_finite() {
                return Err(Error::NonFinite {
                    field: if name == "u" { "u" } else if name == "v" { "v" } else { "w" },
                    time: next.time,
                });
            }
        }
        state = next;
        steps_taken = step_index;

        let capped = state.u.max() >= cfg.sup_cap;
        if step_index % cfg.output_every as u64 == 0 || step_index == n_steps || capped {
            let dt_out = state.time - last_output_time;
            diagnostics.push(diagnose(&state, params, Some((&last_output_w, dt_out))));
            if cfg.store_snapshots {
                snapshots.push(state.clone());
            }
            last_output_w = state.w.clone();
            last_output_time = state.time;
        }
        if capped {
            termination = Termination::GrowthCapReached { time: state.time };
            break;
        }
    }

    Ok(Trajectory {
        diagnostics,
        snapshots,
        final_state: state,
        termination,
        steps: steps_taken,
        substeps: audit.substeps,
        min_u: audit.min_u,
        min_v: audit.min_v,
        min_w: audit.min_w,
    })
}

/// Single step at `cfg.dt`, dispatching on the parameter variant. Builds a
/// fresh solver context; prefer [`Stepper`] inside loops.
pub fn step(state: &State, params: &ModelParams, cfg: &StepConfig) -> Result<State> {
    let stepper = Stepper::new(state.grid(), params, cfg)?;
    stepper.step(state, cfg.dt)
}

/// One refinement level of the energy-identity check.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnergyCheckLevel {
    pub dt: f64,
    pub max_residual: f64,
}

/// Residuals of the discrete energy identity `dE/dt + Diss = 0` across a
/// ladder of time steps, plus the empirical orders between levels.
#[derive(Debug, Clone, Serialize)]
pub struct EnergyCheckReport {
    pub levels: Vec<EnergyCheckLevel>,
    pub orders: Vec<f64>,
}

impl EnergyCheckReport {
    pub fn min_order(&self) -> f64 {
        self.orders.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// For each `dt` level, run `initial` to `t_end` and record the largest
/// per-step residual `|(E_{n+1} - E_n)/dt + Diss_{n+1}|`. The fully
/// parabolic variant uses the full energy and dissipation; the
/// quasi-stationary ones use the reduced energy and their step dissipation.
pub fn energy_identity_check(
    initial: &State,
    params: &ModelParams,
    cfg: &StepConfig,
    dt_levels: &[f64],
    t_end: f64,
) -> Result<EnergyCheckReport> {
    if dt_levels.len() < 2 {
        return Err(Error::InvalidParams("energy check needs at least two dt levels".into()));
    }
    // A refinement study must never silently change its own ladder: CFL
    // violations surface as errors instead of bisecting.
    let mut fixed = *cfg;
    fixed.adaptive_cfl = false;
    let stepper = Stepper::new(initial.grid(), params, &fixed)?;
    let prepared = stepper.slave_signal(initial)?;
    let full_energy = matches!(params.variant, Variant::FullyParabolic);

    let mut levels = Vec::with_capacity(dt_levels.len());
    for &dt in dt_levels {
        let n = (t_end / dt).round().max(1.0) as u64;
        let mut state = prepared.clone();
        let mut e_prev = {
            let r = functionals::energy(&state, params);
            if full_energy {
                r.e
            } else {
                r.e0
            }
        };
        let mut max_residual = 0.0f64;
        for _ in 0..n {
            let next = stepper.step(&state, dt)?;
            let rep = functionals::energy(&next, params);
            let e_new = if full_energy { rep.e } else { rep.e0 };
            let diss = if full_energy {
                functionals::dissipation(&next, params)
            } else {
                functionals::variant_step_dissipation(&next, &state.w, dt, params)
            };
            let residual = ((e_new - e_prev) / dt + diss).abs();
            max_residual = max_residual.max(residual);
            e_prev = e_new;
            state = next;
        }
        levels.push(EnergyCheckLevel { dt, max_residual });
    }
    let orders = levels
        .windows(2)
        .map(|pair| {
            let ratio = pair[0].max_residual / pair[1].max_residual;
            ratio.log2() / (pair[0].dt / pair[1].dt).log2()
        })
        .collect();
    Ok(EnergyCheckReport { levels, orders })
}
