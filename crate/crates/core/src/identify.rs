//! Fitting either identification method from per-episode Gram sums.
//!
//! Each episode contributes two accumulators: closed-loop snapshots
//! `Ψ = [x_c; ϑ; r; f]` and plant snapshots `Ψ = [ϑ; u]`. Any subset of
//! episodes (a training set, or the complement of a validation fold) is then
//! a cheap merge, and every α on a grid reuses the same Gram matrices.

use serde::{Deserialize, Serialize};

use crate::closed_loop::{self, BlockDims, ClEdmdOptions, ClosedLoopKoopman, ControllerModel};
use crate::edmd::{self, GhCache, GramAccumulator, KoopmanPlant};
use crate::error::{dim_err, Error, Result};
use crate::lifting::{self, Episode, LiftingConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Plant EDMD on recorded plant inputs, then closed with the known controller.
    Edmd,
    /// Constrained closed-loop EDMD.
    ClEdmd,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Edmd => "edmd",
            Method::ClEdmd => "cl_edmd",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "edmd" => Ok(Method::Edmd),
            "cl_edmd" => Ok(Method::ClEdmd),
            _ => Err(Error::InvalidArgument(format!("unknown method {s:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeGrams {
    pub closed_loop: GramAccumulator,
    pub plant: GramAccumulator,
    pub dims: BlockDims,
}

pub fn episode_grams(cfg: &LiftingConfig, ep: &Episode) -> Result<EpisodeGrams> {
    let cl = lifting::episode_snapshots(cfg, ep)?;
    let pl = lifting::episode_plant_snapshots(cfg, ep)?;
    Ok(EpisodeGrams {
        closed_loop: GramAccumulator::from_block(&cl.theta_plus, &cl.psi)?,
        plant: GramAccumulator::from_block(&pl.theta_plus, &pl.psi)?,
        dims: cl.dims.into(),
    })
}

/// Scaled Gram matrices of a merged episode set.
#[derive(Debug, Clone)]
pub struct TrainingGrams {
    pub closed_loop: GhCache,
    pub plant: GhCache,
    pub dims: BlockDims,
    pub state_dim: usize,
}

/// Merge episode accumulators in the given order.
pub fn merge_grams<'a, I>(state_dim: usize, parts: I) -> Result<TrainingGrams>
where
    I: IntoIterator<Item = &'a EpisodeGrams>,
{
    let mut it = parts.into_iter();
    let first = it
        .next()
        .ok_or_else(|| Error::InvalidArgument("no episodes to fit".into()))?;
    let mut cl = first.closed_loop.clone();
    let mut pl = first.plant.clone();
    for g in it {
        if g.dims != first.dims {
            return dim_err("episodes have inconsistent snapshot dimensions");
        }
        cl.merge(&g.closed_loop)?;
        pl.merge(&g.plant)?;
    }
    Ok(TrainingGrams {
        closed_loop: cl.finish()?,
        plant: pl.finish()?,
        dims: first.dims,
        state_dim,
    })
}

pub fn training_grams(cfg: &LiftingConfig, episodes: &[Episode]) -> Result<TrainingGrams> {
    let parts = episodes
        .iter()
        .map(|ep| episode_grams(cfg, ep))
        .collect::<Result<Vec<_>>>()?;
    merge_grams(cfg.state_dim, &parts)
}

/// Fit one method at one regularization coefficient. Both methods return the
/// closed loop and the plant; for EDMD the closed loop is the identified plant
/// wrapped with the known controller.
pub fn fit(
    method: Method,
    grams: &TrainingGrams,
    controller: &ControllerModel,
    alpha: f64,
    options: ClEdmdOptions,
) -> Result<(ClosedLoopKoopman, KoopmanPlant)> {
    let m = grams.state_dim;
    match method {
        Method::Edmd => {
            let u_p = edmd::solve_edmd(&grams.plant, alpha)?;
            let plant = KoopmanPlant::new(u_p, m)?;
            let clk = closed_loop::build_uf_from_plant(&plant, controller)?;
            Ok((clk, plant))
        }
        Method::ClEdmd => {
            let c_p = lifting::retract(grams.dims.p_theta, m)?;
            closed_loop::solve_cl_edmd_gh(&grams.closed_loop, grams.dims, controller, &c_p, alpha, options)
        }
    }
}
