//! Closed-loop episodes and datasets from the simulated pendulum.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::controller::PdConfig;
use super::furuta::{furuta_step, FurutaParams, FurutaState};
use super::signal::{generate_signal, SignalKind, SignalSpec};
use crate::closed_loop::ControllerModel;
use crate::error::{Error, Result};
use crate::io;
use crate::lifting::Episode;

/// Encoder resolution in radians.
pub const ENCODER_STEP: f64 = 2.0 * std::f64::consts::PI / 2048.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeConfig {
    pub duration: f64,
    pub dt: f64,
    /// Leading transient removed from the recording.
    pub discard: f64,
    /// Pendulum angle (rad) at which the episode counts as fallen.
    pub fall_threshold: f64,
    /// Standard deviation of Gaussian noise on both measured angles (rad).
    pub noise_std: f64,
    /// Round measured angles to the encoder grid.
    pub quantize: bool,
    pub initial_state: FurutaState,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            duration: 20.0,
            dt: 0.002,
            discard: 1.0,
            fall_threshold: 0.6,
            noise_std: 0.0,
            quantize: false,
            initial_state: [0.0; 4],
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.discard >= 0.0) || !(self.duration > self.discard) || !self.duration.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "duration ({}) must exceed the discarded transient ({})",
                self.duration, self.discard
            )));
        }
        if !(self.fall_threshold > 0.0) {
            return Err(Error::InvalidArgument("fall_threshold must be positive".into()));
        }
        if !(self.noise_std >= 0.0) || !self.noise_std.is_finite() {
            return Err(Error::InvalidArgument("noise_std must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn total_samples(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn discard_samples(&self) -> usize {
        (self.discard / self.dt).round() as usize
    }
}

/// Excitation for the arm reference, the pendulum reference and the feedforward voltage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Excitation {
    pub arm_reference: SignalSpec,
    pub pendulum_reference: SignalSpec,
    pub feedforward: SignalSpec,
}

impl Default for Excitation {
    fn default() -> Self {
        let spec = |kind, amplitude, bit_period| SignalSpec {
            kind,
            amplitude,
            bit_period,
            cutoff_hz: Some(200.0),
            seed: 0,
        };
        Self {
            arm_reference: spec(SignalKind::IntegratedPrbs, 0.1, 100),
            pendulum_reference: spec(SignalKind::Prbs, 0.003, 25),
            feedforward: spec(SignalKind::Prbs, 0.3, 50),
        }
    }
}

impl Excitation {
    /// Same signals with seeds derived from one episode seed.
    pub fn reseeded(&self, episode_seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(episode_seed);
        let mut next = |s: &SignalSpec| SignalSpec {
            seed: rng.next_u64(),
            ..s.clone()
        };
        Self {
            arm_reference: next(&self.arm_reference),
            pendulum_reference: next(&self.pendulum_reference),
            feedforward: next(&self.feedforward),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum EpisodeOutcome {
    Completed(Episode),
    /// The pendulum left the fall threshold (or the state blew up).
    Fell { index: usize, seed: u64, time: f64, angle: f64 },
}

impl EpisodeOutcome {
    pub fn into_result(self) -> Result<Episode> {
        match self {
            Self::Completed(ep) => Ok(ep),
            Self::Fell { index, seed, time, angle } => Err(Error::EpisodeFailed {
                index,
                seed,
                reason: format!("pendulum fell (angle {angle:.3} rad at t = {time:.3} s)"),
            }),
        }
    }
}

/// Simulate the PD-controlled pendulum for one episode.
///
/// Per sample: measure (noise, then optional quantization), form the error,
/// evaluate the controller, add feedforward, saturate, record, advance the
/// controller and the plant. The first `discard` seconds are dropped from the
/// returned recording; `k` and `t` keep their original values.
pub fn run_closed_loop_episode(
    params: &FurutaParams,
    controller: &ControllerModel,
    excitation: &Excitation,
    cfg: &EpisodeConfig,
    seed: u64,
    index: usize,
) -> Result<EpisodeOutcome> {
    params.validate()?;
    cfg.validate()?;
    if (controller.ss.dt() - cfg.dt).abs() > 1e-12 * cfg.dt {
        return Err(Error::SamplePeriod(controller.ss.dt(), cfg.dt));
    }
    if controller.n_errors() != 2 || controller.n_outputs() != 1 {
        return Err(Error::Dimension("controller must map 2 errors to 1 voltage".into()));
    }
    let n = cfg.total_samples();
    let skip = cfg.discard_samples();
    let r1 = generate_signal(&excitation.arm_reference, n, cfg.dt)?;
    let r2 = generate_signal(&excitation.pendulum_reference, n, cfg.dt)?;
    let ff = generate_signal(&excitation.feedforward, n, cfg.dt)?;
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, cfg.noise_std).map_err(|e| Error::InvalidArgument(e.to_string()))?;

    let (ac, bc, cc, dc) = (controller.ss.a(), controller.ss.b(), controller.ss.c(), controller.ss.d());
    let nc = controller.n_states();
    let keep = n - skip;
    let mut xs = DMatrix::zeros(2, keep);
    let mut us = DMatrix::zeros(1, keep);
    let mut rs = DMatrix::zeros(2, keep);
    let mut fs = DMatrix::zeros(1, keep);
    let mut xcs = DMatrix::zeros(nc, keep);
    let mut time = Vec::with_capacity(keep);

    let mut state = cfg.initial_state;
    let mut xc = DVector::zeros(nc);
    let mut e = DVector::zeros(2);
    for k in 0..n {
        let mut meas = [state[0], state[1]];
        for y in meas.iter_mut() {
            if cfg.noise_std > 0.0 {
                *y += noise.sample(&mut noise_rng);
            }
            if cfg.quantize {
                *y = (*y / ENCODER_STEP).round() * ENCODER_STEP;
            }
        }
        e[0] = r1[k] - meas[0];
        e[1] = r2[k] - meas[1];
        let yc = (cc * &xc + dc * &e)[0];
        let u = (yc + ff[k]).clamp(-params.voltage_limit, params.voltage_limit);
        if k >= skip {
            let j = k - skip;
            time.push(k as f64 * cfg.dt);
            xs[(0, j)] = meas[0];
            xs[(1, j)] = meas[1];
            us[(0, j)] = u;
            rs[(0, j)] = r1[k];
            rs[(1, j)] = r2[k];
            fs[(0, j)] = ff[k];
            xcs.set_column(j, &xc);
        }
        xc = ac * &xc + bc * &e;
        state = furuta_step(params, &state, u, cfg.dt);
        if !(state[1].abs() <= cfg.fall_threshold) || state.iter().any(|v| !v.is_finite()) {
            return Ok(EpisodeOutcome::Fell {
                index,
                seed,
                time: (k + 1) as f64 * cfg.dt,
                angle: state[1],
            });
        }
    }
    Ok(EpisodeOutcome::Completed(Episode {
        index,
        dt: cfg.dt,
        time,
        plant_states: xs,
        plant_input: us,
        references: rs,
        feedforward: fs,
        controller_states: xcs,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub plant: FurutaParams,
    pub controller: PdConfig,
    pub episode: EpisodeConfig,
    /// Signal shapes; their seeds are replaced per episode.
    pub excitation: Excitation,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            plant: FurutaParams::default(),
            controller: PdConfig::default(),
            episode: EpisodeConfig::default(),
            excitation: Excitation::default(),
            n_train: 30,
            n_test: 20,
            seed: 0,
        }
    }
}

impl DatasetConfig {
    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&json);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Distinct per-episode seeds, training episodes first.
    pub fn episode_seeds(&self) -> Vec<u64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut seeds: Vec<u64> = Vec::with_capacity(self.n_train + self.n_test);
        while seeds.len() < self.n_train + self.n_test {
            let s = rng.next_u64();
            if !seeds.contains(&s) {
                seeds.push(s);
            }
        }
        seeds
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: Vec<Episode>,
    pub test: Vec<Episode>,
    pub seeds: Vec<u64>,
}

/// Simulate every episode of a dataset in memory. A fallen episode aborts
/// generation with its seed in the error.
pub fn simulate_dataset(cfg: &DatasetConfig) -> Result<Dataset> {
    let controller = cfg.controller.build(cfg.episode.dt)?;
    let seeds = cfg.episode_seeds();
    let mut all = Vec::with_capacity(seeds.len());
    for (i, &seed) in seeds.iter().enumerate() {
        let exc = cfg.excitation.reseeded(seed);
        let out = run_closed_loop_episode(&cfg.plant, &controller, &exc, &cfg.episode, seed, i)?;
        all.push(out.into_result()?);
    }
    let test = all.split_off(cfg.n_train);
    Ok(Dataset { train: all, test, seeds })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub split: String,
    pub index: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub episodes: Vec<ManifestEntry>,
    pub config: DatasetConfig,
    pub hash: String,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Simulate a dataset and write one CSV per episode plus `manifest.json`.
pub fn generate_dataset(cfg: &DatasetConfig, out_dir: &Path) -> Result<Manifest> {
    let data = simulate_dataset(cfg)?;
    std::fs::create_dir_all(out_dir)?;
    let mut episodes = Vec::with_capacity(data.seeds.len());
    let splits = [("train", &data.train), ("test", &data.test)];
    for (split, eps) in splits {
        for (j, ep) in eps.iter().enumerate() {
            let file = format!("{split}_{j:03}.csv");
            io::write_episode_csv(ep, &out_dir.join(&file))?;
            episodes.push(ManifestEntry {
                file,
                split: split.to_string(),
                index: ep.index,
                seed: data.seeds[ep.index],
            });
        }
    }
    let manifest = Manifest {
        episodes,
        config: cfg.clone(),
        hash: cfg.hash(),
    };
    std::fs::write(out_dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Read a dataset written by [`generate_dataset`].
pub fn load_dataset(dir: &Path) -> Result<(Manifest, Dataset)> {
    let manifest: Manifest = serde_json::from_str(&std::fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
    let dt = manifest.config.episode.dt;
    let mut train = Vec::new();
    let mut test = Vec::new();
    for entry in &manifest.episodes {
        let ep = io::read_episode_csv(&dir.join(&entry.file), entry.index, dt)?;
        match entry.split.as_str() {
            "train" => train.push(ep),
            "test" => test.push(ep),
            other => return Err(Error::InvalidArgument(format!("unknown split {other:?}"))),
        }
    }
    let seeds = manifest.episodes.iter().map(|e| e.seed).collect();
    Ok((manifest, Dataset { train, test, seeds }))
}
