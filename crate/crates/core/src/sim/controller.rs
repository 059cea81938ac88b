//! Two parallel PD controllers with filtered derivative, discretized by ZOH.
//!
//! Each channel realizes `K_p + K_d a s / (s + a)`. Since
//! `a s / (s + a) = a − a² / (s + a)`, one filter state per channel suffices.
//! Two state scalings are available:
//!
//! - [`PdRealization::FilteredError`]: `ẋ = −a x + a e`, so `x` is the
//!   low-pass filtered error, output `K_d a (e − x) + K_p e`;
//! - [`PdRealization::Unscaled`]: `ẋ = −a x + e`, output
//!   `K_d (−a² x + a e) + K_p e`.
//!
//! Both have the same transfer function. They differ for regularized
//! closed-loop identification, whose penalty is not invariant to a change of
//! controller coordinates. Both channels sum into a single voltage.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::closed_loop::ControllerModel;
use crate::error::{Error, Result};
use crate::lti::{zoh_discretize, StateSpace};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PdRealization {
    #[default]
    FilteredError,
    Unscaled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PdConfig {
    /// Proportional gains on the arm and pendulum errors.
    pub kp: [f64; 2],
    pub kd: [f64; 2],
    /// Derivative filter pole. Read as rad/s unless `cutoff_in_hz` is set.
    pub cutoff: f64,
    #[serde(default)]
    pub cutoff_in_hz: bool,
    #[serde(default)]
    pub realization: PdRealization,
}

impl Default for PdConfig {
    fn default() -> Self {
        Self {
            kp: [6.0, 30.0],
            kd: [1.8, 2.5],
            cutoff: 50.0,
            cutoff_in_hz: false,
            realization: PdRealization::default(),
        }
    }
}

impl PdConfig {
    pub fn cutoff_rad_s(&self) -> f64 {
        if self.cutoff_in_hz {
            2.0 * std::f64::consts::PI * self.cutoff
        } else {
            self.cutoff
        }
    }

    pub fn build(&self, dt: f64) -> Result<ControllerModel> {
        build_pd_controller_with(self.kp, self.kd, self.cutoff_rad_s(), dt, self.realization)
    }
}

/// Discrete PD controller with two error inputs, two states and one output,
/// in the default [`PdRealization`].
pub fn build_pd_controller(kp: [f64; 2], kd: [f64; 2], a: f64, dt: f64) -> Result<ControllerModel> {
    build_pd_controller_with(kp, kd, a, dt, PdRealization::default())
}

pub fn build_pd_controller_with(
    kp: [f64; 2],
    kd: [f64; 2],
    a: f64,
    dt: f64,
    realization: PdRealization,
) -> Result<ControllerModel> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::InvalidArgument(format!("filter cutoff must be positive, got {a}")));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if kp.iter().chain(&kd).any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("controller gains"));
    }
    let ac = DMatrix::identity(2, 2) * -a;
    let (b, c_gain) = match realization {
        PdRealization::FilteredError => (a, a),
        PdRealization::Unscaled => (1.0, a * a),
    };
    let bc = DMatrix::identity(2, 2) * b;
    let (ad, bd) = zoh_discretize(&ac, &bc, dt)?;
    let c = DMatrix::from_row_slice(1, 2, &[-kd[0] * c_gain, -kd[1] * c_gain]);
    let d = DMatrix::from_row_slice(1, 2, &[kp[0] + kd[0] * a, kp[1] + kd[1] * a]);
    Ok(ControllerModel::new(StateSpace::new(ad, bd, c, d, dt)?))
}
