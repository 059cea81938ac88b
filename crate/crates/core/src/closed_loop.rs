//! Closed-loop Koopman identification with a known linear controller.
//!
//! With the plant Koopman system `(Aᵖ, Bᵖ, Cᵖ, 0)` and controller
//! `(Aᶜ, Bᶜ, Cᶜ, Dᶜ)` in negative feedback, the closed-loop Koopman matrix
//! acting on `Ψ = [x_c; ϑ; r; f]` is
//!
//! ```text
//!        ┌ Aᶜ      −BᶜCᵖ          Bᶜ     0  ┐
//! Uᶠ  =  │                                   │
//!        └ BᵖCᶜ    Aᵖ − BᵖDᶜCᵖ    BᵖDᶜ   Bᵖ ┘
//! ```
//!
//! The second block row is linear in `Uᵖ = [Aᵖ Bᵖ]`: it equals `Uᵖ M` with
//!
//! ```text
//!       ┌ 0    I       0    0 ┐
//! M  =  │                      │
//!       └ Cᶜ  −DᶜCᵖ    Dᶜ   I ┘
//! ```
//!
//! Regressing `Uᶠ` under that equality constraint, with Tikhonov penalty on
//! `‖Uᶠ‖_F`, therefore has a closed-form optimum. The first block row is an
//! ordinary ridge solution and the second is a ridge problem in `Uᵖ` with
//! normal matrix `M H_α Mᵀ`. [`solve_cl_edmd`] computes that optimum;
//! [`SdpData`], [`evaluate_cl_cost`] and [`verify_stationarity`] certify it
//! against the trace/LMI form of the same cost.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::edmd::{self, check_alpha, GhCache, KoopmanPlant};
use crate::error::{dim_err, Error, Result};
use crate::lifting::{LiftingConfig, SnapshotDims, SnapshotMatrices};
use crate::linalg::{self, blocks, serde_matrix};
use crate::lti::{self, StateSpace};

/// Smallest admissible reciprocal condition number of `M H_α Mᵀ`.
pub const CL_RCOND: f64 = 1e-14;

/// Known controller mapping tracking error `e = r − x` to plant input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ControllerModel {
    pub ss: StateSpace,
}

impl ControllerModel {
    pub fn new(ss: StateSpace) -> Self {
        Self { ss }
    }
    pub fn n_states(&self) -> usize {
        self.ss.n_states()
    }
    /// Dimension of the tracking error (= number of references).
    pub fn n_errors(&self) -> usize {
        self.ss.n_inputs()
    }
    /// Dimension of the controller output (= plant input).
    pub fn n_outputs(&self) -> usize {
        self.ss.n_outputs()
    }
}

/// Block sizes of a closed-loop Koopman matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockDims {
    pub n_c: usize,
    pub p_theta: usize,
    pub n_r: usize,
    pub n_f: usize,
}

impl BlockDims {
    fn col_sizes(&self) -> [usize; 4] {
        [self.n_c, self.p_theta, self.n_r, self.n_f]
    }
    fn row_sizes(&self) -> [usize; 2] {
        [self.n_c, self.p_theta]
    }
    pub fn n_state(&self) -> usize {
        self.n_c + self.p_theta
    }
    pub fn n_input(&self) -> usize {
        self.n_r + self.n_f
    }
}

impl From<SnapshotDims> for BlockDims {
    fn from(d: SnapshotDims) -> Self {
        Self {
            n_c: d.n_c,
            p_theta: d.p_theta,
            n_r: d.n_r,
            n_f: d.n_f,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopKoopman {
    pub u_f: DMatrix<f64>,
    pub dims: BlockDims,
    pub controller: ControllerModel,
    pub c_p: DMatrix<f64>,
    pub d_p: DMatrix<f64>,
}

impl ClosedLoopKoopman {
    /// Block `Uᶠ_{ij}` with 1-based indices, `i ∈ 1..=2`, `j ∈ 1..=4`.
    pub fn block(&self, i: usize, j: usize) -> DMatrix<f64> {
        assert!((1..=2).contains(&i) && (1..=4).contains(&j), "block index out of range");
        let rows = self.dims.row_sizes();
        let cols = self.dims.col_sizes();
        let r0: usize = rows[..i - 1].iter().sum();
        let c0: usize = cols[..j - 1].iter().sum();
        self.u_f
            .view((r0, c0), (rows[i - 1], cols[j - 1]))
            .into_owned()
    }

    /// `Aᶠ`, the square part of `Uᶠ` acting on `[x_c; ϑ]`.
    pub fn a_f(&self) -> DMatrix<f64> {
        let n = self.dims.n_state();
        self.u_f.columns(0, n).into_owned()
    }

    pub fn b_f(&self) -> DMatrix<f64> {
        let n = self.dims.n_state();
        self.u_f.columns(n, self.dims.n_input()).into_owned()
    }

    /// Closed-loop Koopman system with input `[r; f]` and output `Cᵖϑ`.
    pub fn to_state_space(&self, dt: f64) -> Result<StateSpace> {
        let m = self.c_p.nrows();
        let c = blocks(&[&[&DMatrix::zeros(m, self.dims.n_c), &self.c_p]])?;
        StateSpace::new(self.a_f(), self.b_f(), c, DMatrix::zeros(m, self.dims.n_input()), dt)
    }
}

fn check_loop(plant_outputs: usize, plant_inputs: usize, controller: &ControllerModel) -> Result<()> {
    if controller.n_errors() != plant_outputs {
        return dim_err(format!(
            "controller takes {} errors but the plant has {} outputs",
            controller.n_errors(),
            plant_outputs
        ));
    }
    if controller.n_outputs() != plant_inputs {
        return dim_err(format!(
            "controller drives {} inputs but the plant has {}",
            controller.n_outputs(),
            plant_inputs
        ));
    }
    Ok(())
}

/// Close the loop around a Koopman plant, block by block.
pub fn build_uf_from_plant(plant: &KoopmanPlant, controller: &ControllerModel) -> Result<ClosedLoopKoopman> {
    if plant.d_p.iter().any(|v| *v != 0.0) {
        return Err(Error::InvalidArgument("plant feedthrough must be zero".into()));
    }
    check_loop(plant.n_outputs(), plant.n_inputs(), controller)?;
    let (ac, bc, cc, dc) = (controller.ss.a(), controller.ss.b(), controller.ss.c(), controller.ss.d());
    let (ap, bp, cp) = (plant.a_p(), plant.b_p(), &plant.c_p);
    let dims = BlockDims {
        n_c: controller.n_states(),
        p_theta: plant.p_theta(),
        n_r: controller.n_errors(),
        n_f: plant.n_inputs(),
    };
    let bc_cp = -(bc * cp);
    let z14 = DMatrix::zeros(dims.n_c, dims.n_f);
    let bp_dc = &bp * dc;
    let a22 = &ap - &bp_dc * cp;
    let u_f = blocks(&[&[ac, &bc_cp, bc, &z14], &[&(&bp * cc), &a22, &bp_dc, &bp]])?;
    Ok(ClosedLoopKoopman {
        u_f,
        dims,
        controller: controller.clone(),
        c_p: cp.clone(),
        d_p: plant.d_p.clone(),
    })
}

/// `M` such that the plant-row block of `Uᶠ` equals `Uᵖ M`.
pub fn constraint_matrix(controller: &ControllerModel, c_p: &DMatrix<f64>, n_f: usize) -> Result<DMatrix<f64>> {
    check_loop(c_p.nrows(), n_f, controller)?;
    let (cc, dc) = (controller.ss.c(), controller.ss.d());
    let (m, p) = c_p.shape();
    let nc = controller.n_states();
    let nu = controller.n_outputs();
    let mut ident_p = DMatrix::zeros(p, p);
    ident_p.fill_with_identity();
    blocks(&[
        &[&DMatrix::zeros(p, nc), &ident_p, &DMatrix::zeros(p, m), &DMatrix::zeros(p, n_f)],
        &[cc, &(-(dc * c_p)), dc, &DMatrix::identity(nu, n_f)],
    ])
}

/// Least-squares plant recovery from an arbitrary `Uᶠ`:
/// `Bᵖ = [Uᶠ₂₁ Uᶠ₂₃ Uᶠ₂₄] [Cᶜ Dᶜ I]⁺`, `Aᵖ = Uᶠ₂₂ + BᵖDᶜCᵖ`.
///
/// This ignores the coupling between the blocks, so re-closing the loop around
/// the result does not reproduce `Uᶠ` in general.
pub fn extract_plant_lstsq(clk: &ClosedLoopKoopman) -> Result<KoopmanPlant> {
    let (cc, dc) = (clk.controller.ss.c(), clk.controller.ss.d());
    let nu = clk.controller.n_outputs();
    let x = blocks(&[&[cc, dc, &DMatrix::identity(nu, clk.dims.n_f)]])?;
    let y = blocks(&[&[&clk.block(2, 1), &clk.block(2, 3), &clk.block(2, 4)]])?;
    let x_pinv = x
        .pseudo_inverse(1e-15)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let bp = y * x_pinv;
    let ap = clk.block(2, 2) + &bp * dc * &clk.c_p;
    let m = clk.c_p.nrows();
    let u_p = blocks(&[&[&ap, &bp]])?;
    let mut plant = KoopmanPlant::new(u_p, m)?;
    plant.c_p = clk.c_p.clone();
    Ok(plant)
}

/// Extract a plant by least squares and close the loop again with the same controller.
pub fn rewrap(clk: &ClosedLoopKoopman) -> Result<ClosedLoopKoopman> {
    build_uf_from_plant(&extract_plant_lstsq(clk)?, &clk.controller)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClEdmdOptions {
    /// Fix the controller rows to `[Aᶜ, −BᶜCᵖ, Bᶜ, 0]` instead of fitting them.
    #[serde(default)]
    pub pin_controller_rows: bool,
}

/// Constrained closed-loop EDMD from snapshot matrices.
pub fn solve_cl_edmd(
    snapshots: &SnapshotMatrices,
    controller: &ControllerModel,
    c_p: &DMatrix<f64>,
    alpha: f64,
    options: ClEdmdOptions,
) -> Result<(ClosedLoopKoopman, KoopmanPlant)> {
    let cache = edmd::compute_gh(&snapshots.theta_plus, &snapshots.psi)?;
    solve_cl_edmd_gh(&cache, snapshots.dims.into(), controller, c_p, alpha, options)
}

/// Constrained closed-loop EDMD from precomputed Gram matrices.
pub fn solve_cl_edmd_gh(
    cache: &GhCache,
    dims: BlockDims,
    controller: &ControllerModel,
    c_p: &DMatrix<f64>,
    alpha: f64,
    options: ClEdmdOptions,
) -> Result<(ClosedLoopKoopman, KoopmanPlant)> {
    check_alpha(alpha)?;
    let n_psi = dims.n_state() + dims.n_input();
    if cache.g.shape() != (dims.n_state(), n_psi) {
        return dim_err(format!(
            "G is {}x{}, expected {}x{}",
            cache.g.nrows(),
            cache.g.ncols(),
            dims.n_state(),
            n_psi
        ));
    }
    if controller.n_states() != dims.n_c || controller.n_errors() != dims.n_r {
        return dim_err(format!(
            "controller ({} states, {} errors) does not match snapshots ({} states, {} references)",
            controller.n_states(),
            controller.n_errors(),
            dims.n_c,
            dims.n_r
        ));
    }
    if c_p.ncols() != dims.p_theta {
        return dim_err(format!("Cᵖ has {} columns, expected {}", c_p.ncols(), dims.p_theta));
    }
    let m_mat = constraint_matrix(controller, c_p, dims.n_f)?;
    let h_alpha = cache.h_alpha(alpha);
    let hint = if alpha == 0.0 {
        "use a positive regularization coefficient".to_string()
    } else {
        format!("increase the regularization coefficient above {alpha}")
    };

    let row1 = if options.pin_controller_rows {
        let (ac, bc) = (controller.ss.a(), controller.ss.b());
        blocks(&[&[ac, &(-(bc * c_p)), bc, &DMatrix::zeros(dims.n_c, dims.n_f)]])?
    } else if dims.n_c == 0 {
        DMatrix::zeros(0, n_psi)
    } else {
        let g1 = cache.g.rows(0, dims.n_c).into_owned();
        linalg::solve_spd_right(&g1, &h_alpha, edmd::EDMD_RCOND, "H_alpha", &hint)?
    };

    let g2 = cache.g.rows(dims.n_c, dims.p_theta).into_owned();
    let normal = linalg::symmetrize(&(&m_mat * &h_alpha * m_mat.transpose()));
    let rhs = &g2 * m_mat.transpose();
    let u_p = linalg::solve_spd_right(&rhs, &normal, CL_RCOND, "M H_alpha Mᵀ", &hint)?;
    let row2 = &u_p * &m_mat;

    let u_f = blocks(&[&[&row1], &[&row2]])?;
    let m = c_p.nrows();
    let mut plant = KoopmanPlant::new(u_p, m)?;
    plant.c_p = c_p.clone();
    let clk = ClosedLoopKoopman {
        u_f,
        dims,
        controller: controller.clone(),
        c_p: c_p.clone(),
        d_p: plant.d_p.clone(),
    };
    Ok((clk, plant))
}

/// Unconstrained ("least-squares") closed-loop EDMD: `Uᶠ = G H_α⁻¹` over the
/// full closed-loop snapshot space, with no block structure imposed.
pub fn solve_closed_loop_unconstrained(
    cache: &GhCache,
    dims: BlockDims,
    controller: &ControllerModel,
    c_p: &DMatrix<f64>,
    alpha: f64,
) -> Result<ClosedLoopKoopman> {
    let n_psi = dims.n_state() + dims.n_input();
    if cache.g.shape() != (dims.n_state(), n_psi) {
        return dim_err(format!(
            "G is {}x{}, expected {}x{}",
            cache.g.nrows(),
            cache.g.ncols(),
            dims.n_state(),
            n_psi
        ));
    }
    check_loop(c_p.nrows(), dims.n_f, controller)?;
    let u_f = edmd::solve_edmd(cache, alpha)?;
    Ok(ClosedLoopKoopman {
        u_f,
        dims,
        controller: controller.clone(),
        c_p: c_p.clone(),
        d_p: DMatrix::zeros(c_p.nrows(), dims.n_f),
    })
}

/// Data of the semidefinite-program form of the regularized cost:
/// minimize `tr(W)` subject to
///
/// ```text
/// ┌ −W + F − He(Uᶠ Gᵀ)    Uᶠ R_α ┐
/// │                               │ ≤ 0,     H_α = R_α R_αᵀ.
/// └ R_αᵀ Uᶠᵀ              −I     ┘
/// ```
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SdpData {
    #[serde(with = "serde_matrix")]
    pub f: DMatrix<f64>,
    #[serde(with = "serde_matrix")]
    pub g: DMatrix<f64>,
    #[serde(with = "serde_matrix")]
    pub h_alpha: DMatrix<f64>,
    /// Lower-triangular Cholesky factor of `H_α`.
    #[serde(with = "serde_matrix")]
    pub r_alpha: DMatrix<f64>,
    pub alpha: f64,
    pub q: usize,
}

pub fn build_sdp_data(cache: &GhCache, alpha: f64) -> Result<SdpData> {
    check_alpha(alpha)?;
    let h_alpha = cache.h_alpha(alpha);
    let rc = linalg::sym_rcond(&h_alpha);
    let chol = if rc >= edmd::EDMD_RCOND {
        h_alpha.clone().cholesky()
    } else {
        None
    };
    let Some(chol) = chol else {
        let eig = cache.h.clone().symmetric_eigenvalues();
        let (lmin, lmax) = (eig.min(), eig.max().max(0.0));
        let needed = cache.q as f64 * (edmd::EDMD_RCOND * lmax - lmin).max(0.0);
        return Err(Error::Singular {
            what: "H_alpha",
            rcond: rc,
            hint: format!("H_alpha is not positive definite; choose alpha > {needed:.3e}"),
        });
    };
    Ok(SdpData {
        f: cache.f.clone(),
        g: cache.g.clone(),
        r_alpha: chol.l(),
        h_alpha,
        alpha,
        q: cache.q,
    })
}

/// `tr(F − He(Uᶠ Gᵀ) + Uᶠ H_α Uᶠᵀ)`.
pub fn evaluate_cl_cost(u_f: &DMatrix<f64>, sdp: &SdpData) -> Result<f64> {
    if u_f.shape() != sdp.g.shape() {
        return dim_err(format!(
            "Uᶠ is {}x{}, expected {}x{}",
            u_f.nrows(),
            u_f.ncols(),
            sdp.g.nrows(),
            sdp.g.ncols()
        ));
    }
    let cross = u_f.component_mul(&sdp.g).sum();
    let quad = (u_f * &sdp.h_alpha).component_mul(u_f).sum();
    Ok(sdp.f.trace() - 2.0 * cross + quad)
}

/// Slack `W` at which the LMI is tight for a given `Uᶠ`; `tr(W)` is the cost.
pub fn tight_slack(u_f: &DMatrix<f64>, sdp: &SdpData) -> DMatrix<f64> {
    let ug = u_f * sdp.g.transpose();
    &sdp.f - (&ug + ug.transpose()) + u_f * &sdp.h_alpha * u_f.transpose()
}

/// The LMI block matrix for a candidate `(Uᶠ, W)`; feasible iff negative semidefinite.
pub fn lmi_matrix(u_f: &DMatrix<f64>, w: &DMatrix<f64>, sdp: &SdpData) -> Result<DMatrix<f64>> {
    let ug = u_f * sdp.g.transpose();
    let top_left = -w + &sdp.f - (&ug + ug.transpose());
    let off = u_f * &sdp.r_alpha;
    let n = sdp.r_alpha.ncols();
    blocks(&[
        &[&top_left, &off],
        &[&off.transpose(), &(-DMatrix::identity(n, n))],
    ])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StationarityReport {
    /// `‖V H_α − G₁‖_F` for the controller rows (0 when they are pinned).
    pub row1_residual: f64,
    /// `‖Uᵖ (M H_α Mᵀ) − G₂ Mᵀ‖_F`.
    pub row2_residual: f64,
    pub tolerance: f64,
    pub cost: f64,
    pub perturbations: usize,
    /// Smallest `J(perturbed) − J(solution)` observed.
    pub min_cost_increase: f64,
    pub passed: bool,
}

/// Numerical certificate that a constrained solution is optimal.
///
/// Checks the normal equations of both row blocks against the scaled tolerance
/// `1e-8 (1 + ‖G‖)`, then evaluates the trace-form cost at `n_perturbations`
/// random feasible perturbations (`Uᶠ` rows re-formed through `M`), none of
/// which may lower the cost by more than `1e-12`.
pub fn verify_stationarity(
    clk: &ClosedLoopKoopman,
    plant: &KoopmanPlant,
    sdp: &SdpData,
    pinned_controller_rows: bool,
    n_perturbations: usize,
    seed: u64,
) -> Result<StationarityReport> {
    let dims = clk.dims;
    let m_mat = constraint_matrix(&clk.controller, &clk.c_p, dims.n_f)?;
    if plant.u_p.ncols() != m_mat.nrows() {
        return dim_err("plant and constraint matrix do not match");
    }
    let g1 = sdp.g.rows(0, dims.n_c);
    let g2 = sdp.g.rows(dims.n_c, dims.p_theta);
    let row1 = clk.u_f.rows(0, dims.n_c);
    let row1_residual = if pinned_controller_rows || dims.n_c == 0 {
        0.0
    } else {
        (row1 * &sdp.h_alpha - g1).norm()
    };
    let normal = &m_mat * &sdp.h_alpha * m_mat.transpose();
    let row2_residual = (&plant.u_p * &normal - g2 * m_mat.transpose()).norm();
    let tolerance = 1e-8 * (1.0 + sdp.g.norm());

    let cost = evaluate_cl_cost(&clk.u_f, sdp)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale_v = 1e-3 * (1.0 + row1.norm());
    let scale_p = 1e-3 * (1.0 + plant.u_p.norm());
    let mut min_cost_increase = f64::INFINITY;
    for _ in 0..n_perturbations {
        let dv = if pinned_controller_rows {
            DMatrix::zeros(dims.n_c, row1.ncols())
        } else {
            random_direction(&mut rng, dims.n_c, row1.ncols()) * scale_v
        };
        let dp = random_direction(&mut rng, plant.u_p.nrows(), plant.u_p.ncols()) * scale_p;
        let new_row1 = row1 + dv;
        let new_row2 = (&plant.u_p + dp) * &m_mat;
        let u_f = blocks(&[&[&new_row1], &[&new_row2]])?;
        let inc = evaluate_cl_cost(&u_f, sdp)? - cost;
        min_cost_increase = min_cost_increase.min(inc);
    }
    let passed = row1_residual <= tolerance
        && row2_residual <= tolerance
        && (n_perturbations == 0 || min_cost_increase >= -1e-12);
    Ok(StationarityReport {
        row1_residual,
        row2_residual,
        tolerance,
        cost,
        perturbations: n_perturbations,
        min_cost_increase,
        passed,
    })
}

/// Random matrix of unit Frobenius norm (zero-sized matrices stay zero).
fn random_direction(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0));
    let n = m.norm();
    if n > 0.0 {
        m / n
    } else {
        m
    }
}

/// Controller states driven by recorded tracking errors (`n_r × K`), starting
/// from `x_c0` (zero when `None`). Returns `n_c × K`.
pub fn reconstruct_controller_state(
    controller: &ControllerModel,
    errors: &DMatrix<f64>,
    x_c0: Option<&DVector<f64>>,
) -> Result<DMatrix<f64>> {
    if errors.nrows() != controller.n_errors() {
        return dim_err(format!(
            "errors have {} rows, controller expects {}",
            errors.nrows(),
            controller.n_errors()
        ));
    }
    let nc = controller.n_states();
    let k = errors.ncols();
    let mut x = match x_c0 {
        Some(x0) if x0.len() != nc => {
            return dim_err(format!("x_c0 has length {}, expected {nc}", x0.len()))
        }
        Some(x0) => x0.clone(),
        None => DVector::zeros(nc),
    };
    let mut out = DMatrix::zeros(nc, k);
    let (a, b) = (controller.ss.a(), controller.ss.b());
    for j in 0..k {
        out.set_column(j, &x);
        x = a * &x + b * errors.column(j);
    }
    Ok(out)
}

/// Eigenvalues of the closed-loop and plant state matrices.
pub fn closed_loop_spectrum(clk: &ClosedLoopKoopman) -> Result<lti::Spectrum> {
    lti::spectrum(&clk.a_f())
}

/// Serialized identified model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentifiedModel {
    #[serde(rename = "U_f", with = "serde_matrix")]
    pub u_f: DMatrix<f64>,
    #[serde(rename = "U_p", with = "serde_matrix")]
    pub u_p: DMatrix<f64>,
    pub controller: ControllerModel,
    pub alpha: f64,
    pub lifting: LiftingConfig,
}

impl IdentifiedModel {
    pub fn new(clk: &ClosedLoopKoopman, plant: &KoopmanPlant, alpha: f64, lifting: &LiftingConfig) -> Self {
        Self {
            u_f: clk.u_f.clone(),
            u_p: plant.u_p.clone(),
            controller: clk.controller.clone(),
            alpha,
            lifting: lifting.clone(),
        }
    }

    /// Rebuild the typed models from their serialized form.
    pub fn into_models(self) -> Result<(ClosedLoopKoopman, KoopmanPlant)> {
        let plant = KoopmanPlant::new(self.u_p, self.lifting.state_dim)?;
        let dims = BlockDims {
            n_c: self.controller.n_states(),
            p_theta: plant.p_theta(),
            n_r: self.controller.n_errors(),
            n_f: plant.n_inputs(),
        };
        if self.u_f.shape() != (dims.n_state(), dims.n_state() + dims.n_input()) {
            return dim_err("U_f shape does not match U_p and the controller");
        }
        let clk = ClosedLoopKoopman {
            u_f: self.u_f,
            dims,
            controller: self.controller,
            c_p: plant.c_p.clone(),
            d_p: plant.d_p.clone(),
        };
        Ok((clk, plant))
    }
}
