//! Lifting functions and snapshot assembly.
//!
//! The lifted plant state is built in two stages. First the raw state `x` is
//! mapped to all monomials of total degree `1..=monomial_degree`, raw state
//! first and then graded lexicographic order (for `m = 2`, degree 2:
//! `x1, x2, x1², x1·x2, x2²`). There is no constant term. Then the last
//! `n_delays` lifted samples are stacked under the current one,
//! `ϑ_k = [θ_k; θ_{k-1}; …; θ_{k-d}]`.
//!
//! Controller states, references and feedforward are never lifted; they are
//! aligned with the lifted state at the same time index.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiftingConfig {
    pub state_dim: usize,
    pub monomial_degree: usize,
    pub n_delays: usize,
    #[serde(default)]
    pub delay_inputs: bool,
}

impl Default for LiftingConfig {
    fn default() -> Self {
        Self {
            state_dim: 2,
            monomial_degree: 2,
            n_delays: 10,
            delay_inputs: false,
        }
    }
}

impl LiftingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.state_dim == 0 {
            return Err(Error::InvalidArgument("state_dim must be positive".into()));
        }
        if self.monomial_degree == 0 {
            return Err(Error::InvalidArgument("monomial_degree must be at least 1".into()));
        }
        Ok(())
    }

    /// Exponent index tuples for every lifted coordinate, in output order.
    pub fn monomials(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        for deg in 1..=self.monomial_degree {
            let mut idx = vec![0usize; deg];
            loop {
                out.push(idx.clone());
                // next non-decreasing tuple in lexicographic order
                let mut pos = deg;
                while pos > 0 && idx[pos - 1] == self.state_dim - 1 {
                    pos -= 1;
                }
                if pos == 0 {
                    break;
                }
                let v = idx[pos - 1] + 1;
                for slot in &mut idx[pos - 1..] {
                    *slot = v;
                }
            }
        }
        out
    }

    /// Number of monomials of degree `1..=monomial_degree`.
    pub fn base_dim(&self) -> usize {
        (1..=self.monomial_degree)
            .map(|k| binomial(self.state_dim + k - 1, k))
            .sum()
    }

    /// Dimension of the delay-embedded lifted plant state.
    pub fn lifted_dim(&self) -> usize {
        self.base_dim() * (self.n_delays + 1)
    }

    /// Width multiplier applied to exogenous inputs.
    pub fn input_multiplier(&self) -> usize {
        if self.delay_inputs {
            self.n_delays + 1
        } else {
            1
        }
    }
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

pub fn lift_state(config: &LiftingConfig, x: &DVector<f64>) -> Result<DVector<f64>> {
    if x.len() != config.state_dim {
        return dim_err(format!("state has length {}, expected {}", x.len(), config.state_dim));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("state"));
    }
    let monos = config.monomials();
    Ok(DVector::from_iterator(
        monos.len(),
        monos.iter().map(|idx| idx.iter().map(|&i| x[i]).product::<f64>()),
    ))
}

/// Lift every column of an `m × K` state sequence.
pub fn lift_sequence(config: &LiftingConfig, xs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if xs.nrows() != config.state_dim {
        return dim_err(format!("states have {} rows, expected {}", xs.nrows(), config.state_dim));
    }
    if xs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("state sequence"));
    }
    let monos = config.monomials();
    Ok(DMatrix::from_fn(monos.len(), xs.ncols(), |r, k| {
        monos[r].iter().map(|&i| xs[(i, k)]).product()
    }))
}

/// Stack `d` past samples under each sample: column `j` of the result is
/// `[s_{j+d}; s_{j+d-1}; …; s_j]`.
pub fn delay_stack(seq: &DMatrix<f64>, d: usize) -> Result<DMatrix<f64>> {
    let (p, len) = seq.shape();
    if len <= d {
        return Err(Error::TooShort { needed: d + 1, got: len });
    }
    let out_len = len - d;
    let mut out = DMatrix::zeros(p * (d + 1), out_len);
    for j in 0..out_len {
        let k = j + d;
        for lag in 0..=d {
            out.view_mut((lag * p, j), (p, 1)).copy_from(&seq.column(k - lag));
        }
    }
    Ok(out)
}

/// Delay-embed a `p_base × K` lifted sequence; output covers times `d..K-1`.
pub fn delay_embed(config: &LiftingConfig, lifted: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if lifted.nrows() != config.base_dim() {
        return dim_err(format!(
            "lifted sequence has {} rows, expected {}",
            lifted.nrows(),
            config.base_dim()
        ));
    }
    delay_stack(lifted, config.n_delays)
}

/// Output map recovering the raw state from the lifted state, `[I_m, 0]`.
///
/// The matching feedthrough is always zero.
pub fn retract(p_theta: usize, m: usize) -> Result<DMatrix<f64>> {
    if p_theta < m {
        return Err(Error::InvalidArgument(format!(
            "lifted dimension {p_theta} is smaller than state dimension {m}"
        )));
    }
    let mut c = DMatrix::zeros(m, p_theta);
    c.view_mut((0, 0), (m, m)).fill_with_identity();
    Ok(c)
}

/// One recorded closed-loop trajectory. Signals are stored column-per-sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub index: usize,
    pub dt: f64,
    /// Time stamp of each sample in seconds.
    pub time: Vec<f64>,
    pub plant_states: DMatrix<f64>,
    pub plant_input: DMatrix<f64>,
    pub references: DMatrix<f64>,
    pub feedforward: DMatrix<f64>,
    /// May have zero rows when the controller is static or its states have
    /// not been reconstructed yet.
    pub controller_states: DMatrix<f64>,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.plant_states.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        let len = self.len();
        let named = [
            ("plant_input", &self.plant_input),
            ("references", &self.references),
            ("feedforward", &self.feedforward),
            ("controller_states", &self.controller_states),
        ];
        for (name, m) in named {
            if m.ncols() != len {
                return dim_err(format!("episode {}: {name} has {} samples, expected {len}", self.index, m.ncols()));
            }
        }
        if self.time.len() != len {
            return dim_err(format!("episode {}: time has {} samples, expected {len}", self.index, self.time.len()));
        }
        Ok(())
    }

    /// Tracking error `r - x` over the episode; requires `n_r = m`.
    pub fn tracking_error(&self) -> Result<DMatrix<f64>> {
        if self.references.nrows() != self.plant_states.nrows() {
            return dim_err("tracking error needs as many references as plant states");
        }
        Ok(&self.references - &self.plant_states)
    }
}

/// Snapshot dimensions `(n_c, p_ϑ, n_r, n_f, q)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotDims {
    pub n_c: usize,
    pub p_theta: usize,
    pub n_r: usize,
    pub n_f: usize,
    pub q: usize,
}

impl SnapshotDims {
    pub fn n_state(&self) -> usize {
        self.n_c + self.p_theta
    }
    pub fn n_psi(&self) -> usize {
        self.n_c + self.p_theta + self.n_r + self.n_f
    }
}

/// Closed-loop snapshot pair: `Ψ = [x_c; ϑ; r; f]` at `k`, `Θ₊ = [x_c; ϑ]` at `k+1`.
#[derive(Debug, Clone)]
pub struct SnapshotMatrices {
    pub psi: DMatrix<f64>,
    pub theta_plus: DMatrix<f64>,
    pub dims: SnapshotDims,
}

/// Open-loop plant snapshot pair: `Ψ = [ϑ; u]` at `k`, `Θ₊ = ϑ` at `k+1`.
#[derive(Debug, Clone)]
pub struct PlantSnapshots {
    pub psi: DMatrix<f64>,
    pub theta_plus: DMatrix<f64>,
    pub p_theta: usize,
    pub n_u: usize,
}

impl PlantSnapshots {
    pub fn q(&self) -> usize {
        self.psi.ncols()
    }
}

fn check_episode(config: &LiftingConfig, ep: &Episode) -> Result<()> {
    ep.validate()?;
    if ep.plant_states.nrows() != config.state_dim {
        return dim_err(format!(
            "episode {} has {} plant states, lifting expects {}",
            ep.index,
            ep.plant_states.nrows(),
            config.state_dim
        ));
    }
    if ep.len() < config.n_delays + 2 {
        return Err(Error::TooShort {
            needed: config.n_delays + 2,
            got: ep.len(),
        });
    }
    Ok(())
}

/// Exogenous signal aligned with the delay-embedded state (times `d..K-1`).
pub fn aligned_input(config: &LiftingConfig, sig: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = config.n_delays;
    if config.delay_inputs {
        delay_stack(sig, d)
    } else {
        Ok(sig.columns(d, sig.ncols() - d).into_owned())
    }
}

/// Lifted, delay-embedded plant state for one episode (times `d..K-1`).
pub fn lifted_episode_states(config: &LiftingConfig, ep: &Episode) -> Result<DMatrix<f64>> {
    let lifted = lift_sequence(config, &ep.plant_states)?;
    delay_embed(config, &lifted)
}

/// Closed-loop snapshots for a single episode.
pub fn episode_snapshots(config: &LiftingConfig, ep: &Episode) -> Result<SnapshotMatrices> {
    check_episode(config, ep)?;
    let d = config.n_delays;
    let theta = lifted_episode_states(config, ep)?;
    let xc = ep.controller_states.columns(d, ep.len() - d).into_owned();
    let r = aligned_input(config, &ep.references)?;
    let f = aligned_input(config, &ep.feedforward)?;
    let n = theta.ncols();
    let q = n - 1;
    let dims = SnapshotDims {
        n_c: xc.nrows(),
        p_theta: theta.nrows(),
        n_r: r.nrows(),
        n_f: f.nrows(),
        q,
    };
    let mut psi = DMatrix::zeros(dims.n_psi(), q);
    let mut theta_plus = DMatrix::zeros(dims.n_state(), q);
    let mut row = 0;
    for block in [&xc, &theta, &r, &f] {
        psi.view_mut((row, 0), (block.nrows(), q))
            .copy_from(&block.columns(0, q));
        row += block.nrows();
    }
    theta_plus
        .view_mut((0, 0), (dims.n_c, q))
        .copy_from(&xc.columns(1, q));
    theta_plus
        .view_mut((dims.n_c, 0), (dims.p_theta, q))
        .copy_from(&theta.columns(1, q));
    Ok(SnapshotMatrices {
        psi,
        theta_plus,
        dims,
    })
}

/// Closed-loop snapshots for several episodes, concatenated in episode order.
/// No snapshot pair straddles two episodes.
pub fn assemble_snapshots(config: &LiftingConfig, episodes: &[Episode]) -> Result<SnapshotMatrices> {
    config.validate()?;
    if episodes.is_empty() {
        return Err(Error::InvalidArgument("no episodes".into()));
    }
    let parts = episodes
        .iter()
        .map(|ep| episode_snapshots(config, ep))
        .collect::<Result<Vec<_>>>()?;
    let first = parts[0].dims;
    for p in &parts {
        if (p.dims.n_c, p.dims.n_r, p.dims.n_f) != (first.n_c, first.n_r, first.n_f) {
            return dim_err("episodes have inconsistent signal dimensions");
        }
    }
    let q: usize = parts.iter().map(|p| p.dims.q).sum();
    let dims = SnapshotDims { q, ..first };
    let mut psi = DMatrix::zeros(dims.n_psi(), q);
    let mut theta_plus = DMatrix::zeros(dims.n_state(), q);
    let mut col = 0;
    for p in &parts {
        let w = p.dims.q;
        psi.columns_mut(col, w).copy_from(&p.psi);
        theta_plus.columns_mut(col, w).copy_from(&p.theta_plus);
        col += w;
    }
    Ok(SnapshotMatrices {
        psi,
        theta_plus,
        dims,
    })
}

/// Open-loop plant snapshots for one episode, using the recorded plant input.
pub fn episode_plant_snapshots(config: &LiftingConfig, ep: &Episode) -> Result<PlantSnapshots> {
    check_episode(config, ep)?;
    let theta = lifted_episode_states(config, ep)?;
    let u = aligned_input(config, &ep.plant_input)?;
    let q = theta.ncols() - 1;
    let (p, nu) = (theta.nrows(), u.nrows());
    let mut psi = DMatrix::zeros(p + nu, q);
    psi.view_mut((0, 0), (p, q)).copy_from(&theta.columns(0, q));
    psi.view_mut((p, 0), (nu, q)).copy_from(&u.columns(0, q));
    Ok(PlantSnapshots {
        psi,
        theta_plus: theta.columns(1, q).into_owned(),
        p_theta: p,
        n_u: nu,
    })
}
