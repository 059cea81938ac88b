//! Prediction scoring: R², NRMSE and episode-wise rollouts.
//!
//! Models are scored by free-running simulation from the lifted initial window
//! of each episode, comparing the retracted physical states with the recorded
//! ones. A rollout whose magnitude leaves [`DIVERGENCE_BOUND`] (or turns
//! non-finite) is stopped early and reported as diverged, with `r2 = -inf`
//! and `nrmse = +inf`.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::closed_loop::{ClEdmdOptions, ClosedLoopKoopman, ControllerModel};
use crate::edmd::KoopmanPlant;
use crate::error::{dim_err, Error, Result};
use crate::identify::{self, EpisodeGrams, Method, TrainingGrams};
use crate::lifting::{self, Episode, LiftingConfig};

/// Absolute state magnitude beyond which a rollout counts as diverged.
pub const DIVERGENCE_BOUND: f64 = 1e8;

fn check_pair(truth: &DMatrix<f64>, pred: &DMatrix<f64>) -> Result<()> {
    if truth.shape() != pred.shape() {
        return dim_err(format!(
            "truth is {}x{} but prediction is {}x{}",
            truth.nrows(),
            truth.ncols(),
            pred.nrows(),
            pred.ncols()
        ));
    }
    if truth.nrows() == 0 {
        return dim_err("no states to score");
    }
    Ok(())
}

/// Coefficient of determination, one state per row, averaged over states.
pub fn r2_score(truth: &DMatrix<f64>, pred: &DMatrix<f64>) -> Result<f64> {
    check_pair(truth, pred)?;
    if truth.ncols() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: truth.ncols(),
        });
    }
    let mut total = 0.0;
    for (i, (t, p)) in truth.row_iter().zip(pred.row_iter()).enumerate() {
        let mean = t.mean();
        let ss_tot: f64 = t.iter().map(|v| (v - mean).powi(2)).sum();
        if ss_tot == 0.0 {
            return Err(Error::InvalidArgument(format!(
                "state {i} is constant; R² is undefined"
            )));
        }
        let ss_res: f64 = t.iter().zip(p.iter()).map(|(a, b)| (a - b).powi(2)).sum();
        total += 1.0 - ss_res / ss_tot;
    }
    Ok(total / truth.nrows() as f64)
}

/// Root-mean-square error of each state divided by its peak absolute value,
/// averaged over states. A fraction, not a percentage.
pub fn nrmse(truth: &DMatrix<f64>, pred: &DMatrix<f64>) -> Result<f64> {
    check_pair(truth, pred)?;
    if truth.ncols() == 0 {
        return Err(Error::TooShort { needed: 1, got: 0 });
    }
    let n = truth.ncols() as f64;
    let mut total = 0.0;
    for (i, (t, p)) in truth.row_iter().zip(pred.row_iter()).enumerate() {
        let peak = t.amax();
        if peak == 0.0 {
            return Err(Error::InvalidArgument(format!(
                "state {i} has zero peak amplitude"
            )));
        }
        let mse: f64 = t.iter().zip(p.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n;
        total += mse.sqrt() / peak;
    }
    Ok(total / truth.nrows() as f64)
}

/// A model that can be rolled out against recorded episodes.
#[derive(Debug, Clone, Copy)]
pub enum Model<'a> {
    /// Closed-loop system driven by references and feedforward.
    ClosedLoop(&'a ClosedLoopKoopman),
    /// Plant alone driven by the recorded plant input.
    Plant(&'a KoopmanPlant),
}

#[derive(Debug, Clone)]
pub struct Rollout {
    /// Retracted predictions for samples `d..K` of the episode.
    pub predicted: DMatrix<f64>,
    /// Recorded plant states over the same samples.
    pub truth: DMatrix<f64>,
    pub diverged: bool,
}

/// Free-running rollout of a model over one episode.
///
/// The initial lifted state is built from the first `n_delays + 1` recorded
/// samples; the closed-loop variant also takes the recorded controller state
/// at that instant. After that only exogenous signals are used.
pub fn rollout_episode(model: Model, lifting_cfg: &LiftingConfig, ep: &Episode) -> Result<Rollout> {
    let d = lifting_cfg.n_delays;
    let theta = lifting::lifted_episode_states(lifting_cfg, ep)?;
    let n = theta.ncols();
    let p = theta.nrows();
    let m = lifting_cfg.state_dim;
    let truth = ep.plant_states.columns(d, n).into_owned();

    let (u_mat, z0, inputs, c_out) = match model {
        Model::ClosedLoop(clk) => {
            if clk.dims.p_theta != p {
                return dim_err(format!("model has {} lifted states, lifting gives {p}", clk.dims.p_theta));
            }
            let nc = clk.dims.n_c;
            if ep.controller_states.nrows() != nc {
                return Err(Error::InvalidArgument(format!(
                    "episode {} has {} controller states, model expects {nc}",
                    ep.index,
                    ep.controller_states.nrows()
                )));
            }
            let r = lifting::aligned_input(lifting_cfg, &ep.references)?;
            let f = lifting::aligned_input(lifting_cfg, &ep.feedforward)?;
            if r.nrows() + f.nrows() != clk.dims.n_input() {
                return dim_err("episode references/feedforward do not match the model inputs");
            }
            let mut z0 = DVector::zeros(nc + p);
            z0.rows_mut(0, nc).copy_from(&ep.controller_states.column(d));
            z0.rows_mut(nc, p).copy_from(&theta.column(0));
            let mut inputs = DMatrix::zeros(r.nrows() + f.nrows(), n);
            inputs.rows_mut(0, r.nrows()).copy_from(&r);
            inputs.rows_mut(r.nrows(), f.nrows()).copy_from(&f);
            (&clk.u_f, z0, inputs, nc)
        }
        Model::Plant(plant) => {
            if plant.p_theta() != p {
                return dim_err(format!("plant has {} lifted states, lifting gives {p}", plant.p_theta()));
            }
            let u = lifting::aligned_input(lifting_cfg, &ep.plant_input)?;
            if u.nrows() != plant.n_inputs() {
                return dim_err("episode plant input does not match the model");
            }
            (&plant.u_p, theta.column(0).into_owned(), u, 0)
        }
    };

    let ns = z0.len();
    let ni = inputs.nrows();
    let mut psi = DVector::zeros(ns + ni);
    let mut next = DVector::zeros(ns);
    let mut predicted = DMatrix::from_element(m, n, f64::NAN);
    psi.rows_mut(0, ns).copy_from(&z0);
    let mut diverged = false;
    for k in 0..n {
        let state = psi.rows(0, ns);
        if state.iter().any(|v| !(v.abs() <= DIVERGENCE_BOUND)) {
            diverged = true;
            break;
        }
        predicted.column_mut(k).copy_from(&state.rows(c_out, m));
        if k + 1 == n {
            break;
        }
        psi.rows_mut(ns, ni).copy_from(&inputs.column(k));
        next.gemv(1.0, u_mat, &psi, 0.0);
        psi.rows_mut(0, ns).copy_from(&next);
    }
    Ok(Rollout {
        predicted,
        truth,
        diverged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeScore {
    pub episode: usize,
    pub r2: f64,
    pub nrmse: f64,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    #[serde(with = "sentinel")]
    pub r2_mean: f64,
    #[serde(with = "sentinel")]
    pub r2_std: f64,
    #[serde(with = "sentinel")]
    pub nrmse_mean: f64,
    #[serde(with = "sentinel")]
    pub nrmse_std: f64,
    #[serde(with = "sentinel_scores")]
    pub per_episode: Vec<EpisodeScore>,
}

impl ScoreReport {
    /// Aggregate per-episode scores. Any diverged episode makes the means
    /// `-inf` / `+inf` and the spreads `+inf`.
    pub fn from_episodes(per_episode: Vec<EpisodeScore>) -> Self {
        let n = per_episode.len() as f64;
        let any_div = per_episode.iter().any(|s| s.diverged);
        let stats = |f: fn(&EpisodeScore) -> f64| {
            let mean = per_episode.iter().map(f).sum::<f64>() / n;
            let var = per_episode.iter().map(|s| (f(s) - mean).powi(2)).sum::<f64>() / n;
            (mean, var.sqrt())
        };
        let (r2_mean, r2_std, nrmse_mean, nrmse_std) = if any_div {
            (f64::NEG_INFINITY, f64::INFINITY, f64::INFINITY, f64::INFINITY)
        } else {
            let (a, b) = stats(|s| s.r2);
            let (c, d) = stats(|s| s.nrmse);
            (a, b, c, d)
        };
        Self {
            r2_mean,
            r2_std,
            nrmse_mean,
            nrmse_std,
            per_episode,
        }
    }

    pub fn any_diverged(&self) -> bool {
        self.per_episode.iter().any(|s| s.diverged)
    }

    /// Per-episode table with header `episode,r2,nrmse,diverged`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for s in &self.per_episode {
            wr.serialize(s)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Rebuild a report from its per-episode table.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let rows = rd.deserialize().collect::<std::result::Result<Vec<EpisodeScore>, _>>()?;
        Ok(Self::from_episodes(rows))
    }
}

/// Score a single rollout. Diverged rollouts get the sentinel values.
pub fn score_rollout(episode: usize, roll: &Rollout) -> Result<EpisodeScore> {
    if roll.diverged {
        return Ok(EpisodeScore {
            episode,
            r2: f64::NEG_INFINITY,
            nrmse: f64::INFINITY,
            diverged: true,
        });
    }
    Ok(EpisodeScore {
        episode,
        r2: r2_score(&roll.truth, &roll.predicted)?,
        nrmse: nrmse(&roll.truth, &roll.predicted)?,
        diverged: false,
    })
}

pub fn score_model(model: Model, lifting_cfg: &LiftingConfig, episodes: &[Episode]) -> Result<ScoreReport> {
    if episodes.is_empty() {
        return Err(Error::InvalidArgument("no episodes to score".into()));
    }
    let per = episodes
        .iter()
        .map(|ep| score_rollout(ep.index, &rollout_episode(model, lifting_cfg, ep)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScoreReport::from_episodes(per))
}

/// Contiguous partition of `n` items into `folds` groups, earlier groups
/// taking the remainder.
pub fn fold_ranges(n: usize, folds: usize) -> Result<Vec<std::ops::Range<usize>>> {
    if folds < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {folds}")));
    }
    if n < folds {
        return Err(Error::InvalidArgument(format!(
            "{n} episodes cannot be split into {folds} folds"
        )));
    }
    let (base, extra) = (n / folds, n % folds);
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for i in 0..folds {
        let len = base + usize::from(i < extra);
        out.push(start..start + len);
        start += len;
    }
    Ok(out)
}

/// Mean validation scores of one method at one regularization coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvPoint {
    pub alpha: f64,
    /// Closed-loop rollout R², averaged over folds.
    pub r2_cl: f64,
    /// Plant rollout R² driven by the recorded input, averaged over folds.
    pub r2_plant: f64,
    pub nrmse_cl: f64,
    pub nrmse_plant: f64,
}

/// Contiguous k-fold split of a training set with per-fold Gram matrices.
///
/// Building this is the expensive part; scoring any `(method, α)` afterwards
/// only solves small linear systems and runs rollouts.
pub struct CrossValidation<'a> {
    lifting: LiftingConfig,
    episodes: &'a [Episode],
    ranges: Vec<std::ops::Range<usize>>,
    fold_grams: Vec<TrainingGrams>,
}

impl<'a> CrossValidation<'a> {
    pub fn new(lifting_cfg: &LiftingConfig, episodes: &'a [Episode], folds: usize) -> Result<Self> {
        let ranges = fold_ranges(episodes.len(), folds)?;
        let grams = episodes
            .iter()
            .map(|ep| identify::episode_grams(lifting_cfg, ep))
            .collect::<Result<Vec<EpisodeGrams>>>()?;
        let fold_grams = ranges
            .iter()
            .map(|r| {
                let outside = grams
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !r.contains(i))
                    .map(|(_, g)| g);
                identify::merge_grams(lifting_cfg.state_dim, outside)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            lifting: lifting_cfg.clone(),
            episodes,
            ranges,
            fold_grams,
        })
    }

    pub fn folds(&self) -> &[std::ops::Range<usize>] {
        &self.ranges
    }

    /// Fit on each fold's complement and score on the fold. A fold whose fit
    /// fails contributes NaN.
    pub fn score(
        &self,
        method: Method,
        controller: &ControllerModel,
        alpha: f64,
        options: ClEdmdOptions,
    ) -> Result<CvPoint> {
        let mut acc = [0.0; 4];
        for (range, grams) in self.ranges.iter().zip(&self.fold_grams) {
            let held_out = &self.episodes[range.clone()];
            let vals = match identify::fit(method, grams, controller, alpha, options) {
                Ok((clk, plant)) => {
                    let cl = score_model(Model::ClosedLoop(&clk), &self.lifting, held_out)?;
                    let pl = score_model(Model::Plant(&plant), &self.lifting, held_out)?;
                    [cl.r2_mean, pl.r2_mean, cl.nrmse_mean, pl.nrmse_mean]
                }
                Err(Error::Singular { .. }) => [f64::NAN; 4],
                Err(e) => return Err(e),
            };
            for (a, v) in acc.iter_mut().zip(vals) {
                *a += v;
            }
        }
        let k = self.ranges.len() as f64;
        Ok(CvPoint {
            alpha,
            r2_cl: acc[0] / k,
            r2_plant: acc[1] / k,
            nrmse_cl: acc[2] / k,
            nrmse_plant: acc[3] / k,
        })
    }
}

/// k-fold cross-validation over contiguous episode groups for every α.
pub fn cross_validate(
    lifting_cfg: &LiftingConfig,
    controller: &ControllerModel,
    episodes: &[Episode],
    folds: usize,
    alphas: &[f64],
    method: Method,
    options: ClEdmdOptions,
) -> Result<Vec<CvPoint>> {
    let cv = CrossValidation::new(lifting_cfg, episodes, folds)?;
    alphas
        .iter()
        .map(|&a| cv.score(method, controller, a, options))
        .collect()
}

// JSON has no infinities; non-finite values travel as strings.
mod sentinel {
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&v.to_string())
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => t.parse().map_err(D::Error::custom),
        }
    }
}

mod sentinel_scores {
    use super::EpisodeScore;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Repr {
        episode: usize,
        #[serde(with = "super::sentinel")]
        r2: f64,
        #[serde(with = "super::sentinel")]
        nrmse: f64,
        diverged: bool,
    }

    pub fn serialize<S: Serializer>(v: &[EpisodeScore], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|e| Repr {
                episode: e.episode,
                r2: e.r2,
                nrmse: e.nrmse,
                diverged: e.diverged,
            })
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<EpisodeScore>, D::Error> {
        Ok(Vec::<Repr>::deserialize(d)?
            .into_iter()
            .map(|r| EpisodeScore {
                episode: r.episode,
                r2: r.r2,
                nrmse: r.nrmse,
                diverged: r.diverged,
            })
            .collect())
    }
}
