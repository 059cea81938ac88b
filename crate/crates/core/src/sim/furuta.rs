//! Rotary (Furuta) inverted pendulum driven by a DC motor.
//!
//! State `[θ, α, θ̇, α̇]`: arm angle, pendulum angle (0 = upright), and their
//! rates. The pendulum is a uniform rod hinged at the arm tip. With
//! `J_a = J_r + m_p L_r²`, `J_0 = J_p + m_p l²`, `c = m_p L_r l` and `l = L_p/2`
//! the equations of motion are
//!
//! ```text
//! ┌ J_a + J_0 sin²α   c cos α ┐ ┌ θ̈ ┐   ┌ τ − D_r θ̇ − 2 J_0 sin α cos α α̇ θ̇ + c sin α α̇² ┐
//! │                           │ │   │ = │                                                 │
//! └ c cos α           J_0     ┘ └ α̈ ┘   └ −D_p α̇ + J_0 sin α cos α θ̇² + m_p g l sin α      ┘
//! ```
//!
//! The motor is wired so that positive voltage turns the arm towards negative
//! `θ`: `τ = −k_t (V + k_t θ̇) / R_m`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type FurutaState = [f64; 4];

/// Number of RK4 substeps per call to [`furuta_step`].
pub const SUBSTEPS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FurutaParams {
    /// Arm inertia about the motor axis, pendulum excluded (kg m²).
    pub rotor_inertia: f64,
    pub pendulum_mass: f64,
    pub pendulum_length: f64,
    pub arm_length: f64,
    pub gravity: f64,
    /// Viscous damping at the motor shaft (N m s/rad).
    pub rotor_damping: f64,
    /// Viscous damping at the pendulum hinge (N m s/rad).
    pub pendulum_damping: f64,
    /// Torque constant, equal to the back-EMF constant (N m/A).
    pub torque_constant: f64,
    pub motor_resistance: f64,
    pub voltage_limit: f64,
}

impl Default for FurutaParams {
    fn default() -> Self {
        let (mr, lr) = (0.095, 0.085);
        Self {
            rotor_inertia: mr * lr * lr / 12.0,
            pendulum_mass: 0.024,
            pendulum_length: 0.129,
            arm_length: lr,
            gravity: 9.81,
            rotor_damping: 1.5e-3,
            pendulum_damping: 5e-4,
            torque_constant: 0.042,
            motor_resistance: 8.4,
            voltage_limit: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Derived {
    j_arm: f64,
    j_0: f64,
    c: f64,
    mgl: f64,
}

impl FurutaParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rotor_inertia", self.rotor_inertia),
            ("pendulum_mass", self.pendulum_mass),
            ("pendulum_length", self.pendulum_length),
            ("arm_length", self.arm_length),
            ("gravity", self.gravity),
            ("torque_constant", self.torque_constant),
            ("motor_resistance", self.motor_resistance),
            ("voltage_limit", self.voltage_limit),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("rotor_damping", self.rotor_damping),
            ("pendulum_damping", self.pendulum_damping),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be nonnegative, got {v}")));
            }
        }
        Ok(())
    }

    fn derived(&self) -> Derived {
        let l = self.pendulum_length / 2.0;
        let mp = self.pendulum_mass;
        let jp = mp * self.pendulum_length.powi(2) / 12.0;
        Derived {
            j_arm: self.rotor_inertia + mp * self.arm_length.powi(2),
            j_0: jp + mp * l * l,
            c: mp * self.arm_length * l,
            mgl: mp * self.gravity * l,
        }
    }

    /// Shaft torque produced by `voltage` (clamped to the limit) at arm rate `theta_dot`.
    pub fn motor_torque(&self, voltage: f64, theta_dot: f64) -> f64 {
        let v = voltage.clamp(-self.voltage_limit, self.voltage_limit);
        let k = self.torque_constant;
        -k * (v + k * theta_dot) / self.motor_resistance
    }
}

fn deriv(p: &FurutaParams, d: &Derived, s: &FurutaState, torque: f64) -> FurutaState {
    let [_, alpha, td, ad] = *s;
    let (sa, ca) = alpha.sin_cos();
    let m11 = d.j_arm + d.j_0 * sa * sa;
    let m12 = d.c * ca;
    let m22 = d.j_0;
    let f1 = torque - p.rotor_damping * td - 2.0 * d.j_0 * sa * ca * ad * td + d.c * sa * ad * ad;
    let f2 = -p.pendulum_damping * ad + d.j_0 * sa * ca * td * td + d.mgl * sa;
    let det = m11 * m22 - m12 * m12;
    [td, ad, (m22 * f1 - m12 * f2) / det, (m11 * f2 - m12 * f1) / det]
}

fn rk4<F: Fn(&FurutaState) -> FurutaState>(f: F, s: &FurutaState, h: f64) -> FurutaState {
    let add = |a: &FurutaState, b: &FurutaState, c: f64| -> FurutaState {
        [a[0] + c * b[0], a[1] + c * b[1], a[2] + c * b[2], a[3] + c * b[3]]
    };
    let k1 = f(s);
    let k2 = f(&add(s, &k1, h / 2.0));
    let k3 = f(&add(s, &k2, h / 2.0));
    let k4 = f(&add(s, &k3, h));
    let mut out = *s;
    for i in 0..4 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Time derivative of the state under a shaft torque.
pub fn furuta_rhs(params: &FurutaParams, state: &FurutaState, torque: f64) -> FurutaState {
    deriv(params, &params.derived(), state, torque)
}

/// Advance the pendulum by `dt` under a held voltage (clamped to the limit).
pub fn furuta_step(params: &FurutaParams, state: &FurutaState, voltage: f64, dt: f64) -> FurutaState {
    let d = params.derived();
    let h = dt / SUBSTEPS as f64;
    let mut s = *state;
    for _ in 0..SUBSTEPS {
        s = rk4(|x| deriv(params, &d, x, params.motor_torque(voltage, x[2])), &s, h);
    }
    s
}

/// Advance by `dt` under a held shaft torque, bypassing the motor model.
pub fn furuta_step_torque(params: &FurutaParams, state: &FurutaState, torque: f64, dt: f64) -> FurutaState {
    let d = params.derived();
    let h = dt / SUBSTEPS as f64;
    let mut s = *state;
    for _ in 0..SUBSTEPS {
        s = rk4(|x| deriv(params, &d, x, torque), &s, h);
    }
    s
}

/// Kinetic plus potential energy, zero potential at the hinge height.
pub fn mechanical_energy(params: &FurutaParams, s: &FurutaState) -> f64 {
    let d = params.derived();
    let [_, alpha, td, ad] = *s;
    let (sa, ca) = alpha.sin_cos();
    0.5 * (d.j_arm + d.j_0 * sa * sa) * td * td + d.c * ca * td * ad + 0.5 * d.j_0 * ad * ad
        + d.mgl * ca
}
