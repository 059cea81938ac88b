mod common;

use clkoop::closed_loop::{
    build_sdp_data, constraint_matrix, rewrap, solve_cl_edmd, verify_stationarity, ClEdmdOptions,
};
use clkoop::edmd::{compute_gh, solve_edmd};
use clkoop::lifting::{assemble_snapshots, retract, SnapshotMatrices};
use clkoop::lti::{eigenvalue_displacement, spectrum};
use common::*;
use nalgebra::DMatrix;
use rand::Rng;

fn snapshots(seed: u64, m: usize, nc: usize, noise: f64) -> (LinearLoop, SnapshotMatrices) {
    let mut g = rng(seed);
    let lp = linear_loop(&mut g, m, nc);
    let eps = linear_episodes(&mut g, &lp, 3, 80, noise);
    let snap = assemble_snapshots(&lp.lifting(), &eps).unwrap();
    (lp, snap)
}

fn opts(pin: bool) -> ClEdmdOptions {
    ClEdmdOptions {
        pin_controller_rows: pin,
    }
}

#[test]
fn exact_recovery_scalar_and_five_states() {
    for (m, nc) in [(1, 1), (5, 2), (5, 0)] {
        let (lp, snap) = snapshots(10 + m as u64, m, nc, 0.0);
        let c_p = retract(m, m).unwrap();
        let (clk, plant) = solve_cl_edmd(&snap, &lp.controller, &c_p, 0.0, opts(false)).unwrap();
        let err = (&plant.u_p - lp.u_p()).norm();
        assert!(err <= 1e-8, "m={m}: {err:e}");
        if nc > 0 {
            let row1 = clk.u_f.rows(0, nc).into_owned();
            let pinned = solve_cl_edmd(&snap, &lp.controller, &c_p, 0.0, opts(true)).unwrap().0;
            assert!((row1 - pinned.u_f.rows(0, nc)).norm() <= 1e-8);
        }
    }
}

/// At α = 0 the plant rows solve ordinary least squares on `[ϑ; u]`, with
/// `u` re-formed from the controller.
#[test]
fn zero_alpha_matches_edmd_on_reconstructed_input() {
    let mut g = rng(99);
    for i in 0..20 {
        let m = g.random_range(1..5);
        let nc = g.random_range(0..3);
        let (lp, snap) = snapshots(200 + i, m, nc, 0.05);
        let c_p = retract(m, m).unwrap();
        let (_, plant) = solve_cl_edmd(&snap, &lp.controller, &c_p, 0.0, opts(false)).unwrap();
        let mm = constraint_matrix(&lp.controller, &c_p, 1).unwrap();
        let regressors = &mm * &snap.psi;
        let targets = snap.theta_plus.rows(nc, m).into_owned();
        let direct = solve_edmd(&compute_gh(&targets, &regressors).unwrap(), 0.0).unwrap();
        let scale = 1.0 + direct.norm();
        assert!((&plant.u_p - &direct).norm() / scale <= 1e-10, "dataset {i}");
    }
}

/// Independent oracle: the regularized plant rows minimize
/// `‖Θ₂⁺ − Uᵖ M Ψ‖² + α ‖Uᵖ M‖²`, solved here through an SVD of the
/// augmented regression.
#[test]
fn regularized_solution_matches_augmented_least_squares() {
    for (seed, alpha) in [(1u64, 1e-3), (2, 0.5), (3, 20.0)] {
        let (lp, snap) = snapshots(seed, 3, 2, 0.05);
        let c_p = retract(3, 3).unwrap();
        let (_, plant) = solve_cl_edmd(&snap, &lp.controller, &c_p, alpha, opts(false)).unwrap();
        let mm = constraint_matrix(&lp.controller, &c_p, 1).unwrap();
        let q = snap.psi.ncols();
        let n = mm.ncols();
        let mut x = DMatrix::zeros(q + n, mm.nrows());
        x.rows_mut(0, q).copy_from(&(&mm * &snap.psi).transpose());
        x.rows_mut(q, n).copy_from(&(mm.transpose() * alpha.sqrt()));
        let mut y = DMatrix::zeros(q + n, 3);
        y.rows_mut(0, q).copy_from(&snap.theta_plus.rows(2, 3).transpose());
        let oracle = x.svd(true, true).solve(&y, 1e-14).unwrap().transpose();
        let err = (&plant.u_p - &oracle).norm() / oracle.norm();
        assert!(err <= 1e-8, "alpha={alpha}: {err:e}");
    }
}

#[test]
fn stationarity_certificate() {
    let (lp, snap) = snapshots(5, 3, 2, 0.05);
    let c_p = retract(3, 3).unwrap();
    let cache = compute_gh(&snap.theta_plus, &snap.psi).unwrap();
    for alpha in [1e-3, 1.0, 1e3] {
        let sdp = build_sdp_data(&cache, alpha).unwrap();
        for pin in [false, true] {
            let (clk, plant) = solve_cl_edmd(&snap, &lp.controller, &c_p, alpha, opts(pin)).unwrap();
            let rep = verify_stationarity(&clk, &plant, &sdp, pin, 100, 7).unwrap();
            assert!(rep.passed, "alpha={alpha} pin={pin}: {rep:?}");
            assert!(rep.min_cost_increase >= 0.0);

            let mut off = plant.clone();
            off.u_p[(0, 0)] += 1e-2;
            let rep = verify_stationarity(&clk, &off, &sdp, pin, 10, 7).unwrap();
            assert!(!rep.passed);
        }
    }
}

#[test]
fn pinned_rewrap_is_identity() {
    let (lp, snap) = snapshots(8, 4, 2, 0.1);
    let c_p = retract(4, 4).unwrap();
    for alpha in [1e-3, 1.0, 100.0] {
        let (clk, _) = solve_cl_edmd(&snap, &lp.controller, &c_p, alpha, opts(true)).unwrap();
        let back = rewrap(&clk).unwrap();
        assert!((&back.u_f - &clk.u_f).amax() <= 1e-12);
        let before = spectrum(&clk.a_f()).unwrap().eigenvalues;
        let after = spectrum(&back.a_f()).unwrap().eigenvalues;
        assert!(eigenvalue_displacement(&before, &after).unwrap() <= 1e-9);
    }
}

#[test]
fn norm_does_not_increase_with_alpha() {
    let (lp, snap) = snapshots(12, 3, 2, 0.05);
    let c_p = retract(3, 3).unwrap();
    let cache = compute_gh(&snap.theta_plus, &snap.psi).unwrap();
    let dims = snap.dims.into();
    let mut prev = f64::INFINITY;
    for k in 0..=60 {
        let alpha = 10f64.powf(-3.0 + 0.1 * k as f64);
        let (clk, _) =
            clkoop::closed_loop::solve_cl_edmd_gh(&cache, dims, &lp.controller, &c_p, alpha, opts(false)).unwrap();
        let n = clk.u_f.norm();
        assert!(n <= prev * (1.0 + 1e-12), "alpha={alpha}");
        prev = n;
    }
}

#[test]
fn rejects_mismatched_controller() {
    let (lp, snap) = snapshots(4, 2, 1, 0.0);
    let other = linear_loop(&mut rng(0), 2, 2);
    let c_p = retract(2, 2).unwrap();
    assert!(solve_cl_edmd(&snap, &other.controller, &c_p, 1.0, opts(false)).is_err());
    assert!(solve_cl_edmd(&snap, &lp.controller, &c_p, -1.0, opts(false)).is_err());
}
