//! Energy, dissipation, and the closed-form L1 laws, evaluated as exact
//! discrete functionals on states.
//!
//! The free energy splits as
//!
//! ```text
//! E0(u, w) = int [L(u) - u w] + (D/2)||grad w||^2 + (delta/2)||w||^2
//! E(u,v,w) = E0(u, w) + (eps/2) || -D Lap w + delta w - v ||^2
//! ```
//!
//! with the entropy integrand `L(r) = r ln r - r + 1 >= 0`, and decays along
//! the fully parabolic flow at the rate
//!
//! ```text
//! Diss = int u |grad(ln u - w)|^2
//!      + (1 + delta*eps)/nu * ||R||^2 + eps*D/nu * ||grad R||^2 ,
//! R = -D Lap w + delta w - v .
//! ```
//!
//! For the quasi-stationary variants the decay of E0 is driven by the first
//! term plus `nu*eps*D ||grad dt_w||^2` (mean-zero signal) respectively
//! `nu*eps*(D ||grad dt_w||^2 + delta ||dt_w||^2)` (degrading signal), with
//! `dt_w` realized as the step difference quotient.
//!
//! All norms are the volume-weighted discrete ones, `||grad .||^2` is the
//! face Dirichlet form, and `||e^w||_1` uses the midpoint (cell-value) rule,
//! so the convex-duality inequality `E0(u, w) >= E(w)` and its equality case
//! `u = M e^w / ||e^w||_1` hold exactly at the discrete level (they reduce
//! to a relative entropy between two discrete probability vectors).

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::ops;
use crate::params::{ModelParams, Variant};
use crate::state::State;

/// Cells below this floor contribute nothing to the transport term of the
/// dissipation (their logarithm is treated as absent, matching a scheme
/// that can produce exact zeros).
pub const U_FLOOR: f64 = 1e-300;

/// Switch to the degenerate closed-form branch when `|delta*eps - 1|` is
/// below this threshold (the generic branch cancels catastrophically there).
pub const DEGENERATE_SWITCH: f64 = 1e-9;

/// Entropy integrand `L(r) = r ln r - r + 1`, with the limit value
/// `L(0) = 1`. Negative input is rejected.
pub fn entropy_density(r: f64) -> Result<f64> {
    if r < 0.0 || !r.is_finite() {
        return Err(Error::NegativeInput(format!("entropy integrand needs r >= 0, got {r}")));
    }
    if r == 0.0 {
        return Ok(1.0);
    }
    Ok(r * r.ln() - r + 1.0)
}

/// Term-by-term energy evaluation. The combined values satisfy
/// `e0 = entropy_term - coupling_term + grad_term + l2_term` and
/// `e = e0 + relax_term` by construction.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct EnergyReport {
    pub entropy_term: f64,
    pub coupling_term: f64,
    pub grad_term: f64,
    pub l2_term: f64,
    pub relax_term: f64,
    pub e0: f64,
    pub e: f64,
}

/// Evaluate the energy of a state.
///
/// For the mean-zero variant the `delta/2 ||w||^2` and relaxation terms are
/// absent (its energy is the reduced `E0` with `delta = 0`).
pub fn energy(state: &State, params: &ModelParams) -> EnergyReport {
    let delta = params.effective_delta();
    let entropy_term = integrate_entropy(&state.u);
    let coupling_term = ops::inner(&state.u, &state.w);
    let grad_term = 0.5 * params.diff * ops::gradient_sq_norm(&state.w);
    let l2_term = 0.5 * delta * ops::l2_norm_sq(&state.w);
    let relax_term = match params.variant {
        Variant::EllipticMeanZero => 0.0,
        _ => 0.5 * params.eps * ops::l2_norm_sq(&relax_residual(state, params)),
    };
    let e0 = entropy_term - coupling_term + grad_term + l2_term;
    EnergyReport { entropy_term, coupling_term, grad_term, l2_term, relax_term, e0, e: e0 + relax_term }
}

/// `int L(u)`; zeros contribute the limit value `L(0) = 1` per unit volume.
fn integrate_entropy(u: &Field) -> f64 {
    let vals: Vec<f64> = u
        .values()
        .iter()
        .map(|&r| if r <= 0.0 { 1.0 } else { r * r.ln() - r + 1.0 })
        .collect();
    let f = Field::new(u.grid(), vals).expect("same grid");
    ops::integrate(&f)
}

/// `R = -D Lap_h w + delta w - v`.
pub fn relax_residual(state: &State, params: &ModelParams) -> Field {
    let lap = ops::laplacian_neumann(&state.w);
    Field::from_fn(state.grid(), |i| {
        -params.diff * lap[i] + params.delta * state.w[i] - state.v[i]
    })
}

/// Transport part of the dissipation: the face-assembled
/// `int u |grad(ln u - w)|^2` with the same upwind face `u` as the flux
/// scheme. Faces touching a cell below `U_FLOOR` contribute zero.
pub fn transport_dissipation(u: &Field, w: &Field) -> f64 {
    let uv = u.values();
    let wv = w.values();
    let mut total = 0.0;
    for fc in u.grid().faces() {
        let ul = uv[fc.left];
        let ur = uv[fc.right];
        if ul <= U_FLOOR || ur <= U_FLOOR {
            continue;
        }
        let dw = wv[fc.right] - wv[fc.left];
        let up = crate::ops::upwind_face_u(ul, ur, dw);
        let dlog = ur.ln() - ul.ln() - dw;
        total += fc.trans * up * dlog * dlog;
    }
    total
}

/// Full dissipation of the fully parabolic flow (transport + relaxation +
/// relaxation-gradient terms). Nonnegative by construction.
pub fn dissipation(state: &State, params: &ModelParams) -> f64 {
    let r = relax_residual(state, params);
    transport_dissipation(&state.u, &state.w)
        + (1.0 + params.delta * params.eps) / params.nu * ops::l2_norm_sq(&r)
        + params.eps * params.diff / params.nu * ops::gradient_sq_norm(&r)
}

/// Step dissipation of the quasi-stationary variants, with the signal rate
/// realized as the difference quotient `(w_new - w_old)/dt`.
pub fn variant_step_dissipation(
    state: &State,
    w_old: &Field,
    dt: f64,
    params: &ModelParams,
) -> f64 {
    let wdot = Field::from_fn(state.grid(), |i| (state.w[i] - w_old[i]) / dt);
    let transport = transport_dissipation(&state.u, &state.w);
    match params.variant {
        Variant::EllipticMeanZero => {
            transport + params.nu * params.eps * params.diff * ops::gradient_sq_norm(&wdot)
        }
        Variant::EllipticDegradation => {
            transport
                + params.nu
                    * params.eps
                    * (params.diff * ops::gradient_sq_norm(&wdot)
                        + params.delta * ops::l2_norm_sq(&wdot))
        }
        Variant::FullyParabolic => dissipation(state, params),
    }
}

/// `ln ||e^w||_1`, shift-guarded so the exponential never overflows.
pub fn log_exp_norm(w: &Field) -> f64 {
    let wmax = w.max();
    let shifted = w.map(|x| (x - wmax).exp());
    wmax + ops::integrate(&shifted).ln()
}

/// The convex-duality lower bound on `E0` at fixed mass:
///
/// ```text
/// E(w) = (D/2)||grad w||^2 + (delta/2)||w||^2
///        - M ln ||e^w||_1 + M ln M - M + |Omega| .
/// ```
///
/// `E0(u, w) >= E(w)` for every admissible `u` with `||u||_1 = M`, with
/// equality exactly at `u = M e^w / ||e^w||_1`.
pub fn energy_lower_bound(state: &State, params: &ModelParams, mass: f64) -> Result<f64> {
    if !(mass > 0.0) {
        return Err(Error::InvalidParams(format!("mass must be positive, got {mass}")));
    }
    let actual = ops::integrate(&state.u);
    if (actual - mass).abs() > 1e-8 * mass.abs().max(1e-300) {
        return Err(Error::MassMismatch { expected: mass, actual });
    }
    Ok(signal_profile_energy(&state.w, params, mass))
}

/// `E(w)` itself, without the mass precondition (used internally where the
/// mass is exact by construction).
pub fn signal_profile_energy(w: &Field, params: &ModelParams, mass: f64) -> f64 {
    let delta = params.effective_delta();
    let omega = w.grid().domain_volume();
    0.5 * params.diff * ops::gradient_sq_norm(w) + 0.5 * delta * ops::l2_norm_sq(w)
        - mass * log_exp_norm(w)
        + mass * mass.ln()
        - mass
        + omega
}

/// Reduced energy of a mean-zero signal profile:
///
/// ```text
/// F(W) = (|Omega| / 2M) (D ||grad W||^2 + delta ||W||^2)
///        - |Omega| ln( ||e^W||_1 / |Omega| ) .
/// ```
///
/// Rejects profiles whose discrete mean is not zero.
pub fn f_functional(w: &Field, params: &ModelParams, mass: f64) -> Result<f64> {
    if !(mass > 0.0) {
        return Err(Error::InvalidParams(format!("mass must be positive, got {mass}")));
    }
    let m = ops::mean(w);
    let scale = ops::sup_norm(w).max(1.0);
    if m.abs() > 1e-8 * scale {
        return Err(Error::NonzeroMean(m));
    }
    let delta = params.effective_delta();
    let omega = w.grid().domain_volume();
    Ok(
        omega / (2.0 * mass)
            * (params.diff * ops::gradient_sq_norm(w) + delta * ops::l2_norm_sq(w))
            - omega * (log_exp_norm(w) - omega.ln()),
    )
}

/// The constant `chi` tying the reduced functional to the full energy:
/// `E0(u_W, w_W) = (M/|Omega|) F(W) + chi` for `w_W = W + M/(delta |Omega|)`
/// and `u_W = M e^{w_W} / ||e^{w_W}||_1`.
pub fn f_functional_offset(params: &ModelParams, mass: f64, omega: f64) -> f64 {
    -mass * mass / (2.0 * params.delta * omega) + mass * mass.ln() - mass + omega
        - mass * omega.ln()
}

/// Closed-form mass of the settled population:
/// `||v(t)||_1 = ||v_in||_1 e^{-t/(nu eps)} + M (1 - e^{-t/(nu eps)})`.
pub fn closed_form_mass_v(t: f64, mass: f64, v_in_mass: f64, params: &ModelParams) -> f64 {
    let decay = (-t / (params.nu * params.eps)).exp();
    v_in_mass * decay + mass * (1.0 - decay)
}

/// Closed-form mass of the signal. The generic branch
///
/// ```text
/// ||w(t)||_1 = M/delta + (||w_in||_1 - M/delta) e^{-delta t/nu}
///            + eps/(delta eps - 1) (||v_in||_1 - M)(e^{-t/(nu eps)} - e^{-delta t/nu})
/// ```
///
/// degenerates when `delta*eps = 1`; within `DEGENERATE_SWITCH` of that
/// point the limit form `(||v_in||_1 - M)/nu * t e^{-delta t/nu}` is used.
pub fn closed_form_mass_w(
    t: f64,
    mass: f64,
    v_in_mass: f64,
    w_in_mass: f64,
    params: &ModelParams,
) -> f64 {
    let base = mass / params.delta
        + (w_in_mass - mass / params.delta) * (-params.delta * t / params.nu).exp();
    let de = params.delta * params.eps;
    if (de - 1.0).abs() <= DEGENERATE_SWITCH {
        base + (v_in_mass - mass) / params.nu * t * (-params.delta * t / params.nu).exp()
    } else {
        base
            + params.eps / (de - 1.0)
                * (v_in_mass - mass)
                * ((-t / (params.nu * params.eps)).exp() - (-params.delta * t / params.nu).exp())
    }
}
