//! Excitation signals: PRBS, integrated PRBS, and their low-pass smoothing.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    Prbs,
    IntegratedPrbs,
    ConstantZero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub kind: SignalKind,
    /// Level of the binary sequence. For the integrated kind this is a rate.
    pub amplitude: f64,
    /// Samples each bit is held for.
    pub bit_period: usize,
    /// First-order low-pass cutoff; `None` leaves the signal unsmoothed.
    pub cutoff_hz: Option<f64>,
    pub seed: u64,
}

impl SignalSpec {
    pub fn zero() -> Self {
        Self {
            kind: SignalKind::ConstantZero,
            amplitude: 0.0,
            bit_period: 1,
            cutoff_hz: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bit_period == 0 {
            return Err(Error::InvalidArgument("bit_period must be at least 1".into()));
        }
        if !self.amplitude.is_finite() || self.amplitude < 0.0 {
            return Err(Error::InvalidArgument(format!("amplitude must be nonnegative, got {}", self.amplitude)));
        }
        if let Some(fc) = self.cutoff_hz {
            if !(fc > 0.0) || !fc.is_finite() {
                return Err(Error::InvalidArgument(format!("cutoff must be positive, got {fc}")));
            }
        }
        Ok(())
    }
}

/// Maximal-length 31-bit Fibonacci LFSR, feedback polynomial `x³¹ + x²⁸ + 1`.
#[derive(Debug, Clone)]
pub struct Lfsr31 {
    state: u32,
}

impl Lfsr31 {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = loop {
            let s = rng.next_u32() & 0x7fff_ffff;
            if s != 0 {
                break s;
            }
        };
        Self { state }
    }

    pub fn next_bit(&mut self) -> bool {
        let bit = ((self.state >> 30) ^ (self.state >> 27)) & 1;
        self.state = ((self.state << 1) | bit) & 0x7fff_ffff;
        bit == 1
    }
}

/// Deterministic excitation of `length` samples.
pub fn generate_signal(spec: &SignalSpec, length: usize, dt: f64) -> Result<Vec<f64>> {
    spec.validate()?;
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if spec.kind == SignalKind::ConstantZero {
        return Ok(vec![0.0; length]);
    }
    let mut lfsr = Lfsr31::new(spec.seed);
    let mut level = 0.0;
    let mut raw: Vec<f64> = (0..length)
        .map(|k| {
            if k % spec.bit_period == 0 {
                level = if lfsr.next_bit() { spec.amplitude } else { -spec.amplitude };
            }
            level
        })
        .collect();
    if spec.kind == SignalKind::IntegratedPrbs {
        let mut acc = 0.0;
        for v in raw.iter_mut() {
            acc += *v * dt;
            *v = acc;
        }
    }
    if let Some(fc) = spec.cutoff_hz {
        let beta = 1.0 - (-2.0 * std::f64::consts::PI * fc * dt).exp();
        let mut y = 0.0;
        for v in raw.iter_mut() {
            y += beta * (*v - y);
            *v = y;
        }
    }
    Ok(raw)
}
