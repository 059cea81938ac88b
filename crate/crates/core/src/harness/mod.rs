//! Experiment harness: dataset generation, α sweeps, Table-style scoring and
//! the re-wrap experiment, all driven by one JSON [`ExperimentConfig`].
//!
//! Every command is deterministic given its configuration; CSV and JSON
//! outputs are byte-identical across runs.

mod rewrap;
mod score;
mod sweep;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use rewrap::{run_rewrap, write_rewrap_outputs, RewrapPath, RewrapResult, CONSTRAINED_TOLERANCE};
pub use score::{
    score_combinations, select_alpha, write_score_outputs, Combination, CombinationResult, EigenDump,
};
pub use sweep::{read_sweep_csv, run_sweep, write_sweep_outputs, SweepRow, SWEEP_HEADER};

use crate::closed_loop::{reconstruct_controller_state, ClEdmdOptions, ControllerModel};
use crate::error::{Error, Result};
use crate::identify::Method;
use crate::lifting::{Episode, LiftingConfig};
use crate::sim::episode::{load_dataset, simulate_dataset, Dataset, DatasetConfig, MANIFEST_FILE};

/// Which rollout a score refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreTarget {
    /// Closed loop driven by the references and the feedforward.
    ClosedLoop,
    /// Plant alone driven by the recorded input.
    Plant,
}

impl ScoreTarget {
    pub fn name(self) -> &'static str {
        match self {
            ScoreTarget::ClosedLoop => "closed_loop",
            ScoreTarget::Plant => "plant",
        }
    }
}

/// `count` points log-spaced between `10^log_min` and `10^log_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaGrid {
    pub count: usize,
    pub log_min: f64,
    pub log_max: f64,
}

impl Default for AlphaGrid {
    fn default() -> Self {
        Self {
            count: 180,
            log_min: -3.0,
            log_max: 3.0,
        }
    }
}

impl AlphaGrid {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::InvalidArgument("alpha grid needs at least one point".into()));
        }
        if !self.log_min.is_finite() || !self.log_max.is_finite() {
            return Err(Error::InvalidArgument("alpha grid bounds must be finite".into()));
        }
        if self.count > 1 && !(self.log_min < self.log_max) {
            return Err(Error::InvalidArgument(format!(
                "alpha grid must be strictly increasing, got log_min {} and log_max {}",
                self.log_min, self.log_max
            )));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![10f64.powf(self.log_min)];
        }
        let step = (self.log_max - self.log_min) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| 10f64.powf(self.log_min + step * i as f64))
            .collect()
    }
}

/// Where the episodes come from. A directory holding a manifest wins; without
/// one the dataset is simulated in memory from `generate`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetSource {
    pub dir: Option<PathBuf>,
    pub generate: DatasetConfig,
}

/// Fixed α for one combination, bypassing cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaChoice {
    pub method: Method,
    pub selection: ScoreTarget,
    pub alpha: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoreSettings {
    /// Explicit α values; combinations not listed use the CV argmax.
    pub alphas: Vec<AlphaChoice>,
    /// Reuse the CV columns of an earlier sweep instead of recomputing them.
    pub sweep_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewrapSettings {
    pub alpha: f64,
    /// Measurement noise of the dataset simulated for the experiment (rad).
    pub noise_std: f64,
}

impl Default for RewrapSettings {
    fn default() -> Self {
        Self {
            alpha: 1e-3,
            noise_std: 0.002,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub lifting: LiftingConfig,
    pub alpha_grid: AlphaGrid,
    pub methods: Vec<Method>,
    /// Selection targets evaluated by the score command.
    pub targets: Vec<ScoreTarget>,
    pub folds: usize,
    pub options: ClEdmdOptions,
    pub score: ScoreSettings,
    pub rewrap: RewrapSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSource::default(),
            lifting: LiftingConfig::default(),
            alpha_grid: AlphaGrid::default(),
            methods: vec![Method::Edmd, Method::ClEdmd],
            targets: vec![ScoreTarget::Plant, ScoreTarget::ClosedLoop],
            folds: 3,
            options: ClEdmdOptions::default(),
            score: ScoreSettings::default(),
            rewrap: RewrapSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let cfg: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.lifting.validate()?;
        if self.lifting.delay_inputs {
            return Err(Error::InvalidArgument(
                "delay_inputs is not supported by closed-loop identification".into(),
            ));
        }
        self.alpha_grid.validate()?;
        self.dataset.generate.episode.validate()?;
        self.dataset.generate.plant.validate()?;
        if self.methods.is_empty() || self.targets.is_empty() {
            return Err(Error::InvalidArgument("methods and targets must be nonempty".into()));
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return Err(Error::InvalidArgument(format!("method {} listed twice", m.name())));
            }
        }
        if self.folds < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 folds, got {}", self.folds)));
        }
        for a in std::iter::once(self.rewrap.alpha).chain(self.score.alphas.iter().map(|c| c.alpha)) {
            if !(a >= 0.0) || !a.is_finite() {
                return Err(Error::InvalidArgument(format!("invalid regularization coefficient {a}")));
            }
        }
        if !(self.rewrap.noise_std >= 0.0) {
            return Err(Error::InvalidArgument("rewrap noise_std must be nonnegative".into()));
        }
        Ok(())
    }
}

/// A resolved experiment: configuration, episodes and the known controller.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    /// Generation settings of the episodes in use (from the manifest when loaded).
    pub dataset_config: DatasetConfig,
    pub data: Dataset,
    pub controller: ControllerModel,
}

impl Experiment {
    /// Load or simulate the dataset and build the controller.
    pub fn prepare(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let (dataset_config, mut data) = match &config.dataset.dir {
            Some(dir) if dir.join(MANIFEST_FILE).exists() => {
                let (manifest, data) = load_dataset(dir)?;
                (manifest.config, data)
            }
            Some(dir) => {
                return Err(Error::InvalidArgument(format!(
                    "{} has no {MANIFEST_FILE}",
                    dir.display()
                )))
            }
            None => (config.dataset.generate.clone(), simulate_dataset(&config.dataset.generate)?),
        };
        let controller = dataset_config.controller.build(dataset_config.episode.dt)?;
        for ep in data.train.iter_mut().chain(data.test.iter_mut()) {
            fill_controller_states(ep, &controller)?;
        }
        if data.train.len() < config.folds {
            return Err(Error::InvalidArgument(format!(
                "{} training episodes cannot be split into {} folds",
                data.train.len(),
                config.folds
            )));
        }
        Ok(Self {
            config,
            dataset_config,
            data,
            controller,
        })
    }
}

/// Reconstruct missing controller states from the recorded tracking errors,
/// starting from rest.
fn fill_controller_states(ep: &mut Episode, controller: &ControllerModel) -> Result<()> {
    if ep.controller_states.nrows() == 0 && controller.n_states() > 0 {
        ep.controller_states = reconstruct_controller_state(controller, &ep.tracking_error()?, None)?;
    }
    Ok(())
}

/// Simulate the configured dataset and write it to `out_dir`; returns the
/// manifest path.
pub fn cmd_generate(config: &ExperimentConfig, out_dir: &Path) -> Result<PathBuf> {
    config.validate()?;
    crate::sim::episode::generate_dataset(&config.dataset.generate, out_dir)?;
    Ok(out_dir.join(MANIFEST_FILE))
}

pub fn cmd_sweep(config: ExperimentConfig, out_dir: &Path) -> Result<Vec<SweepRow>> {
    let exp = Experiment::prepare(config)?;
    let rows = run_sweep(&exp)?;
    write_sweep_outputs(&rows, out_dir)?;
    Ok(rows)
}

pub fn cmd_score(config: ExperimentConfig, out_dir: &Path) -> Result<Vec<CombinationResult>> {
    let exp = Experiment::prepare(config)?;
    let rows = match &exp.config.score.sweep_csv {
        Some(path) => read_sweep_csv(path)?,
        None if needs_cv(&exp.config) => {
            let mut cv_only = exp.clone();
            cv_only.config.methods = cv_methods(&exp.config);
            run_sweep(&cv_only)?
        }
        None => Vec::new(),
    };
    let results = score_combinations(&exp, &rows)?;
    write_score_outputs(&results, out_dir)?;
    Ok(results)
}

pub fn cmd_rewrap(config: ExperimentConfig, out_dir: &Path) -> Result<RewrapResult> {
    let exp = Experiment::prepare(config)?;
    let result = run_rewrap(&exp)?;
    write_rewrap_outputs(&result, out_dir)?;
    result.check()?;
    Ok(result)
}

fn cv_methods(cfg: &ExperimentConfig) -> Vec<Method> {
    cfg.methods
        .iter()
        .copied()
        .filter(|m| {
            cfg.targets
                .iter()
                .any(|t| !cfg.score.alphas.iter().any(|c| c.method == *m && c.selection == *t))
        })
        .collect()
}

fn needs_cv(cfg: &ExperimentConfig) -> bool {
    !cv_methods(cfg).is_empty()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid() {
        let g = AlphaGrid::default().values();
        assert_eq!(g.len(), 180);
        assert!((g[0] - 1e-3).abs() < 1e-18);
        assert!((g[179] - 1e3).abs() < 1e-10);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn rejects_bad_grid() {
        let g = AlphaGrid {
            count: 5,
            log_min: 1.0,
            log_max: 1.0,
        };
        assert!(g.validate().is_err());
        let one = AlphaGrid {
            count: 1,
            log_min: 0.0,
            log_max: 0.0,
        };
        assert_eq!(one.values(), vec![1.0]);
    }

    #[test]
    fn config_json_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        let cfg: ExperimentConfig =
            serde_json::from_str(r#"{"methods": ["cl_edmd"], "alpha_grid": {"count": 3, "log_min": 0, "log_max": 1}}"#)
                .unwrap();
        assert_eq!(cfg.methods, vec![Method::ClEdmd]);
        assert_eq!(cfg.alpha_grid.values().len(), 3);
    }

    #[test]
    fn config_validation() {
        let cfg = ExperimentConfig {
            folds: 1,
            ..ExperimentConfig::default()
        };
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.lifting.delay_inputs = true;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.dataset.generate.episode.duration = -1.0;
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig {
            methods: vec![Method::Edmd, Method::Edmd],
            ..ExperimentConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
