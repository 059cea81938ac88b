//! Extended DMD with Tikhonov regularization.
//!
//! Everything is expressed through the scaled Gram matrices
//!
//! ```text
//! G = Θ₊Ψᵀ / q,   H = ΨΨᵀ / q,   F = Θ₊Θ₊ᵀ / q
//! ```
//!
//! so that the regularized Koopman matrix is `U = G (H + α/q · I)⁻¹`, the
//! minimizer of `‖Θ₊ − UΨ‖²_F / q + α‖U‖²_F / q`. Keeping the `1/q` scaling
//! makes `α` comparable between datasets of different size.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::linalg::{self, serde_matrix, symmetrize};
use crate::lifting;
use crate::lti::StateSpace;

/// Smallest admissible reciprocal condition number of `H_α`.
pub const EDMD_RCOND: f64 = 1e-14;

/// Unnormalized Gram sums, accumulated one column block at a time.
///
/// Sums are associative, so per-episode accumulators can be merged in any
/// grouping (e.g. to form cross-validation folds) with a deterministic result
/// as long as the merge order is fixed.
#[derive(Debug, Clone)]
pub struct GramAccumulator {
    theta_psi: DMatrix<f64>,
    psi_psi: DMatrix<f64>,
    theta_theta: DMatrix<f64>,
    q: usize,
}

impl GramAccumulator {
    pub fn new(n_out: usize, n_in: usize) -> Self {
        Self {
            theta_psi: DMatrix::zeros(n_out, n_in),
            psi_psi: DMatrix::zeros(n_in, n_in),
            theta_theta: DMatrix::zeros(n_out, n_out),
            q: 0,
        }
    }

    pub fn from_block(theta_plus: &DMatrix<f64>, psi: &DMatrix<f64>) -> Result<Self> {
        let mut acc = Self::new(theta_plus.nrows(), psi.nrows());
        acc.add(theta_plus, psi)?;
        Ok(acc)
    }

    pub fn add(&mut self, theta_plus: &DMatrix<f64>, psi: &DMatrix<f64>) -> Result<()> {
        if theta_plus.ncols() != psi.ncols() {
            return dim_err(format!(
                "Θ₊ has {} columns but Ψ has {}",
                theta_plus.ncols(),
                psi.ncols()
            ));
        }
        if theta_plus.nrows() != self.theta_psi.nrows() || psi.nrows() != self.psi_psi.nrows() {
            return dim_err("snapshot block does not match accumulator dimensions");
        }
        if !linalg::all_finite(theta_plus) || !linalg::all_finite(psi) {
            return Err(Error::NonFinite("snapshot data"));
        }
        self.theta_psi.gemm(1.0, theta_plus, &psi.transpose(), 1.0);
        self.psi_psi.gemm(1.0, psi, &psi.transpose(), 1.0);
        self.theta_theta.gemm(1.0, theta_plus, &theta_plus.transpose(), 1.0);
        self.q += psi.ncols();
        Ok(())
    }

    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if self.theta_psi.shape() != other.theta_psi.shape() {
            return dim_err("cannot merge accumulators of different shape");
        }
        self.theta_psi += &other.theta_psi;
        self.psi_psi += &other.psi_psi;
        self.theta_theta += &other.theta_theta;
        self.q += other.q;
        Ok(())
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn finish(&self) -> Result<GhCache> {
        if self.q == 0 {
            return Err(Error::InvalidArgument("no snapshots accumulated".into()));
        }
        let s = 1.0 / self.q as f64;
        Ok(GhCache {
            g: &self.theta_psi * s,
            h: symmetrize(&(&self.psi_psi * s)),
            f: symmetrize(&(&self.theta_theta * s)),
            q: self.q,
        })
    }
}

/// Scaled Gram matrices of one dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GhCache {
    #[serde(with = "serde_matrix")]
    pub g: DMatrix<f64>,
    #[serde(with = "serde_matrix")]
    pub h: DMatrix<f64>,
    #[serde(with = "serde_matrix")]
    pub f: DMatrix<f64>,
    pub q: usize,
}

impl GhCache {
    /// `H_α = H + (α/q) I`.
    pub fn h_alpha(&self, alpha: f64) -> DMatrix<f64> {
        let n = self.h.nrows();
        &self.h + DMatrix::identity(n, n) * (alpha / self.q as f64)
    }
}

pub fn compute_gh(theta_plus: &DMatrix<f64>, psi: &DMatrix<f64>) -> Result<GhCache> {
    if psi.ncols() == 0 {
        return Err(Error::InvalidArgument("q must be at least 1".into()));
    }
    GramAccumulator::from_block(theta_plus, psi)?.finish()
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "regularization coefficient must be finite and nonnegative, got {alpha}"
        )));
    }
    Ok(())
}

/// Tikhonov-regularized EDMD, `U = G H_α⁻¹`, via a Cholesky solve.
pub fn solve_edmd(cache: &GhCache, alpha: f64) -> Result<DMatrix<f64>> {
    check_alpha(alpha)?;
    let hint = if alpha == 0.0 {
        "use a positive regularization coefficient".to_string()
    } else {
        format!("increase the regularization coefficient above {alpha}")
    };
    linalg::solve_spd_right(&cache.g, &cache.h_alpha(alpha), EDMD_RCOND, "H_alpha", &hint)
}

/// Plant Koopman system `ϑ⁺ = Aᵖϑ + Bᵖυ`, `x = Cᵖϑ` with `Uᵖ = [Aᵖ Bᵖ]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KoopmanPlant {
    #[serde(with = "serde_matrix")]
    pub u_p: DMatrix<f64>,
    #[serde(with = "serde_matrix")]
    pub c_p: DMatrix<f64>,
    #[serde(with = "serde_matrix")]
    pub d_p: DMatrix<f64>,
}

impl KoopmanPlant {
    /// Wrap `[Aᵖ Bᵖ]` with the retraction onto the first `m` lifted states.
    pub fn new(u_p: DMatrix<f64>, m: usize) -> Result<Self> {
        let p = u_p.nrows();
        if u_p.ncols() < p {
            return dim_err(format!("Uᵖ is {}x{}, narrower than square", p, u_p.ncols()));
        }
        let c_p = lifting::retract(p, m)?;
        let nu = u_p.ncols() - p;
        Ok(Self {
            u_p,
            c_p,
            d_p: DMatrix::zeros(m, nu),
        })
    }

    pub fn p_theta(&self) -> usize {
        self.u_p.nrows()
    }
    pub fn n_inputs(&self) -> usize {
        self.u_p.ncols() - self.u_p.nrows()
    }
    pub fn n_outputs(&self) -> usize {
        self.c_p.nrows()
    }
    pub fn a_p(&self) -> DMatrix<f64> {
        let p = self.p_theta();
        self.u_p.columns(0, p).into_owned()
    }
    pub fn b_p(&self) -> DMatrix<f64> {
        let p = self.p_theta();
        self.u_p.columns(p, self.n_inputs()).into_owned()
    }

    pub fn to_state_space(&self, dt: f64) -> Result<StateSpace> {
        StateSpace::new(self.a_p(), self.b_p(), self.c_p.clone(), self.d_p.clone(), dt)
    }
}

/// Pure lifted rollout `ϑ_{k+1} = Aᵖϑ_k + Bᵖυ_k`; no re-lifting between steps.
///
/// Returns `ϑ_0..ϑ_K` for `K` inputs.
pub fn predict_lifted(
    plant: &KoopmanPlant,
    theta0: &DVector<f64>,
    inputs: &[DVector<f64>],
) -> Result<Vec<DVector<f64>>> {
    let p = plant.p_theta();
    if theta0.len() != p {
        return dim_err(format!("ϑ₀ has length {}, expected {p}", theta0.len()));
    }
    let nu = plant.n_inputs();
    let mut out = Vec::with_capacity(inputs.len() + 1);
    let mut psi = DVector::zeros(p + nu);
    out.push(theta0.clone());
    for (k, u) in inputs.iter().enumerate() {
        if u.len() != nu {
            return dim_err(format!("input {k} has length {}, expected {nu}", u.len()));
        }
        psi.rows_mut(0, p).copy_from(&out[k]);
        psi.rows_mut(p, nu).copy_from(u);
        out.push(&plant.u_p * &psi);
    }
    Ok(out)
}
