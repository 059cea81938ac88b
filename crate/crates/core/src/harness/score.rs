use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Experiment, ScoreTarget, SweepRow};
use crate::error::{Error, Result};
use crate::identify::{fit, training_grams, Method};
use crate::lti::spectrum;
use crate::scoring::{score_model, Model, ScoreReport};

/// An identification method paired with the rollout whose CV score selects α.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Combination {
    pub method: Method,
    pub selection: ScoreTarget,
}

impl Combination {
    pub fn label(&self) -> String {
        format!("{}_{}", self.method.name(), self.selection.name())
    }
}

/// Eigenvalues as `[re, im]` pairs, ordered by descending modulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenDump {
    pub alpha: f64,
    pub rho_cl: f64,
    pub rho_plant: f64,
    pub closed_loop: Vec<[f64; 2]>,
    pub plant: Vec<[f64; 2]>,
}

/// Test-set scores of one combination at its selected α.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinationResult {
    pub combination: Combination,
    pub alpha: f64,
    pub closed_loop: ScoreReport,
    pub plant: ScoreReport,
    pub eigenvalues: EigenDump,
}

impl CombinationResult {
    pub fn report(&self, target: ScoreTarget) -> &ScoreReport {
        match target {
            ScoreTarget::ClosedLoop => &self.closed_loop,
            ScoreTarget::Plant => &self.plant,
        }
    }
}

/// α with the highest cross-validated R² for `selection`, smallest α on ties.
/// NaN rows are skipped.
pub fn select_alpha(rows: &[SweepRow], method: Method, selection: ScoreTarget) -> Result<f64> {
    let mut best: Option<(f64, f64)> = None;
    for r in rows.iter().filter(|r| r.method == method) {
        let s = match selection {
            ScoreTarget::ClosedLoop => r.r2_cl,
            ScoreTarget::Plant => r.r2_plant,
        };
        if s.is_nan() {
            continue;
        }
        let better = match best {
            None => true,
            Some((a, b)) => s > b || (s == b && r.alpha < a),
        };
        if better {
            best = Some((r.alpha, s));
        }
    }
    best.map(|(a, _)| a).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "no usable {} score for method {} in the sweep",
            selection.name(),
            method.name()
        ))
    })
}

/// Fit every (method, selection) combination on the training episodes at its
/// α (explicit, or the CV argmax from `rows`) and score both rollouts on the
/// test episodes.
pub fn score_combinations(exp: &Experiment, rows: &[SweepRow]) -> Result<Vec<CombinationResult>> {
    let cfg = &exp.config;
    if exp.data.test.is_empty() {
        return Err(Error::InvalidArgument("the dataset has no test episodes".into()));
    }
    let grams = training_grams(&cfg.lifting, &exp.data.train)?;
    let mut out = Vec::new();
    for &method in &cfg.methods {
        for &selection in &cfg.targets {
            let combination = Combination { method, selection };
            let alpha = match cfg
                .score
                .alphas
                .iter()
                .find(|c| c.method == method && c.selection == selection)
            {
                Some(c) => c.alpha,
                None => select_alpha(rows, method, selection)?,
            };
            let (clk, plant) = fit(method, &grams, &exp.controller, alpha, cfg.options)?;
            let closed_loop = score_model(Model::ClosedLoop(&clk), &cfg.lifting, &exp.data.test)?;
            let plant_report = score_model(Model::Plant(&plant), &cfg.lifting, &exp.data.test)?;
            let cl_spec = spectrum(&clk.a_f())?;
            let p_spec = spectrum(&plant.a_p())?;
            let pairs = |v: &[num_complex::Complex64]| v.iter().map(|l| [l.re, l.im]).collect();
            out.push(CombinationResult {
                combination,
                alpha,
                closed_loop,
                plant: plant_report,
                eigenvalues: EigenDump {
                    alpha,
                    rho_cl: cl_spec.spectral_radius,
                    rho_plant: p_spec.spectral_radius,
                    closed_loop: pairs(&cl_spec.eigenvalues),
                    plant: pairs(&p_spec.eigenvalues),
                },
            });
        }
    }
    Ok(out)
}

/// Write `table.csv`, per-episode `score_<method>_<selection>_<target>.csv`,
/// `score_<method>_<selection>.json` and `eigenvalues_<method>_<selection>.json`.
pub fn write_score_outputs(results: &[CombinationResult], out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let mut table = String::from("method,selection,alpha,target,r2_mean,r2_std,nrmse_mean,nrmse_std\n");
    for res in results {
        let label = res.combination.label();
        for target in [ScoreTarget::ClosedLoop, ScoreTarget::Plant] {
            let rep = res.report(target);
            table.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                res.combination.method.name(),
                res.combination.selection.name(),
                res.alpha,
                target.name(),
                rep.r2_mean,
                rep.r2_std,
                rep.nrmse_mean,
                rep.nrmse_std
            ));
            let file = std::fs::File::create(out_dir.join(format!("score_{label}_{}.csv", target.name())))?;
            rep.write_csv(std::io::BufWriter::new(file))?;
        }
        std::fs::write(
            out_dir.join(format!("score_{label}.json")),
            serde_json::to_string_pretty(res)?,
        )?;
        std::fs::write(
            out_dir.join(format!("eigenvalues_{label}.json")),
            serde_json::to_string_pretty(&res.eigenvalues)?,
        )?;
    }
    std::fs::write(out_dir.join("table.csv"), table)?;
    Ok(())
}
