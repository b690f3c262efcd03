//! Physical parameters and model-variant selection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which of the three coupled systems is being advanced.
///
/// All variants share the cell-transport equation
/// `dt_u = div(grad u - u grad w)` and the nesting relaxation
/// `nu*eps*dt_v = u - v`; they differ in how the signal `w` is produced:
///
/// * `FullyParabolic` — `nu*dt_w = D*Lap w - delta*w + v` (w is dynamic),
/// * `EllipticMeanZero` — `0 = D*Lap w + v - <v>` with the gauge `<w> = 0`
///   (w is slaved to v; `delta` is ignored),
/// * `EllipticDegradation` — `0 = D*Lap w - delta*w + v` (w slaved to v).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// CLI name `a1`.
    #[serde(alias = "a1")]
    FullyParabolic,
    /// CLI name `tw`.
    #[serde(alias = "tw")]
    EllipticMeanZero,
    /// CLI name `twd`.
    #[serde(alias = "twd")]
    EllipticDegradation,
}

impl Variant {
    /// Short CLI/config token for this variant.
    pub fn token(self) -> &'static str {
        match self {
            Variant::FullyParabolic => "a1",
            Variant::EllipticMeanZero => "tw",
            Variant::EllipticDegradation => "twd",
        }
    }

    /// Whether the signal field carries a sign constraint (`w >= 0`).
    /// The mean-zero variant pins `<w> = 0` instead, so `w` may be signed.
    pub fn signal_nonnegative(self) -> bool {
        !matches!(self, Variant::EllipticMeanZero)
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a1" => Ok(Variant::FullyParabolic),
            "tw" => Ok(Variant::EllipticMeanZero),
            "twd" => Ok(Variant::EllipticDegradation),
            other => Err(Error::InvalidParams(format!(
                "unknown variant {other:?} (expected a1, tw, or twd)"
            ))),
        }
    }
}

/// Physical constants of the model.
///
/// `nu` and `eps` set the relaxation clocks of the signal and nesting
/// equations, `diff` is the signal diffusivity, and `delta` its degradation
/// rate. The total cell mass `M` is not a parameter: it is inherited from
/// the initial data and conserved by the dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub nu: f64,
    pub eps: f64,
    pub diff: f64,
    pub delta: f64,
    pub variant: Variant,
}

impl ModelParams {
    pub fn new(nu: f64, eps: f64, diff: f64, delta: f64, variant: Variant) -> Result<Self> {
        let p = ModelParams { nu, eps, diff, delta, variant };
        p.validate()?;
        Ok(p)
    }

    /// Check the parameter invariants: `nu`, `eps`, `diff` strictly positive;
    /// `delta` strictly positive for the variants that degrade the signal
    /// (it is ignored by the mean-zero variant).
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0) || !self.nu.is_finite() {
            return Err(Error::InvalidParams(format!("nu must be positive, got {}", self.nu)));
        }
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(Error::InvalidParams(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.diff > 0.0) || !self.diff.is_finite() {
            return Err(Error::InvalidParams(format!("diff must be positive, got {}", self.diff)));
        }
        match self.variant {
            Variant::EllipticMeanZero => {
                if self.delta < 0.0 || !self.delta.is_finite() {
                    return Err(Error::InvalidParams(format!(
                        "delta must be finite and nonnegative, got {}",
                        self.delta
                    )));
                }
            }
            _ => {
                if !(self.delta > 0.0) || !self.delta.is_finite() {
                    return Err(Error::InvalidParams(format!(
                        "delta must be positive for variant {}, got {}",
                        self.variant.token(),
                        self.delta
                    )));
                }
            }
        }
        Ok(())
    }

    /// Degradation rate as seen by the energy functionals: zero for the
    /// mean-zero variant (its energy carries no `delta/2 ||w||^2` term).
    pub fn effective_delta(&self) -> f64 {
        match self.variant {
            Variant::EllipticMeanZero => 0.0,
            _ => self.delta,
        }
    }
}
