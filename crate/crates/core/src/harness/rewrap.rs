use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{fill_controller_states, Experiment};
use crate::closed_loop::{
    rewrap, solve_cl_edmd_gh, solve_closed_loop_unconstrained, ClEdmdOptions, ClosedLoopKoopman,
};
use crate::error::{Error, Result};
use crate::identify::training_grams;
use crate::lifting::retract;
use crate::lti::{eigenvalue_displacement, spectrum};
use crate::sim::episode::simulate_dataset;

/// Largest eigenvalue displacement accepted for the constrained path.
pub const CONSTRAINED_TOLERANCE: f64 = 1e-9;

/// Closed-loop eigenvalues before and after extracting the plant and closing
/// the loop again.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewrapPath {
    pub before: Vec<Complex64>,
    pub after: Vec<Complex64>,
    /// Largest distance between greedily paired eigenvalues.
    pub max_displacement: f64,
    pub rho_before: f64,
    pub rho_after: f64,
    /// Whether the number of eigenvalues inside the unit circle changed.
    pub crosses_unit_circle: bool,
}

impl RewrapPath {
    fn new(clk: &ClosedLoopKoopman) -> Result<Self> {
        let before = spectrum(&clk.a_f())?;
        let after = spectrum(&rewrap(clk)?.a_f())?;
        let inside = |v: &[Complex64]| v.iter().filter(|l| l.norm() < 1.0).count();
        Ok(Self {
            max_displacement: eigenvalue_displacement(&before.eigenvalues, &after.eigenvalues)?,
            rho_before: before.spectral_radius,
            rho_after: after.spectral_radius,
            crosses_unit_circle: inside(&before.eigenvalues) != inside(&after.eigenvalues),
            before: before.eigenvalues,
            after: after.eigenvalues,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewrapResult {
    pub alpha: f64,
    pub noise_std: f64,
    /// Closed loop identified with the structural constraint.
    pub constrained: RewrapPath,
    /// Closed loop identified without constraint, plant recovered by least squares.
    pub lstsq: RewrapPath,
}

impl RewrapResult {
    /// Fails when the constrained path moved an eigenvalue.
    pub fn check(&self) -> Result<()> {
        if !(self.constrained.max_displacement <= CONSTRAINED_TOLERANCE) {
            return Err(Error::Assertion(format!(
                "constrained re-wrap moved an eigenvalue by {:.3e} (tolerance {CONSTRAINED_TOLERANCE:e})",
                self.constrained.max_displacement
            )));
        }
        Ok(())
    }
}

/// Re-wrap experiment on training data simulated with measurement noise.
///
/// Both paths identify the closed loop at the configured α from the same
/// noisy episodes, extract the plant by least squares and reconnect the known
/// controller. The constrained path pins the controller rows to the known
/// controller, which makes the whole of `Uᶠ` structured; with fitted
/// controller rows re-wrapping would replace them and move the spectrum.
pub fn run_rewrap(exp: &Experiment) -> Result<RewrapResult> {
    let settings = &exp.config.rewrap;
    let mut gen = exp.dataset_config.clone();
    gen.episode.noise_std = settings.noise_std;
    gen.n_test = 0;
    let mut train = simulate_dataset(&gen)?.train;
    for ep in &mut train {
        fill_controller_states(ep, &exp.controller)?;
    }
    let lifting = &exp.config.lifting;
    let grams = training_grams(lifting, &train)?;
    let c_p = retract(grams.dims.p_theta, lifting.state_dim)?;
    let (constrained, _) = solve_cl_edmd_gh(
        &grams.closed_loop,
        grams.dims,
        &exp.controller,
        &c_p,
        settings.alpha,
        ClEdmdOptions {
            pin_controller_rows: true,
        },
    )?;
    let free = solve_closed_loop_unconstrained(&grams.closed_loop, grams.dims, &exp.controller, &c_p, settings.alpha)?;
    Ok(RewrapResult {
        alpha: settings.alpha,
        noise_std: settings.noise_std,
        constrained: RewrapPath::new(&constrained)?,
        lstsq: RewrapPath::new(&free)?,
    })
}

/// Write `rewrap.csv` (`lambda_re,lambda_im,stage,path`) and `rewrap.json`.
pub fn write_rewrap_outputs(result: &RewrapResult, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let mut csv = String::from("lambda_re,lambda_im,stage,path\n");
    for (name, path) in [("constrained", &result.constrained), ("lstsq", &result.lstsq)] {
        for (stage, eigs) in [("before", &path.before), ("after", &path.after)] {
            for l in eigs {
                csv.push_str(&format!("{},{},{stage},{name}\n", l.re, l.im));
            }
        }
    }
    std::fs::write(out_dir.join("rewrap.csv"), csv)?;
    std::fs::write(out_dir.join("rewrap.json"), serde_json::to_string_pretty(result)?)?;
    Ok(())
}
