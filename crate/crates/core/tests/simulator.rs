use std::time::Instant;

use clkoop::lti::{feedback_interconnect, spectrum, StateSpace};
use clkoop::sim::episode::ENCODER_STEP;
use clkoop::sim::{
    furuta_rhs, furuta_step, furuta_step_torque, generate_dataset, load_dataset, mechanical_energy,
    run_closed_loop_episode, simulate_dataset, DatasetConfig, EpisodeConfig, EpisodeOutcome, Excitation,
    FurutaParams, FurutaState, PdConfig,
};
use clkoop::Error;
use nalgebra::{DMatrix, Matrix2};

fn jacobian<F: Fn(&FurutaState) -> FurutaState>(f: F, x: &FurutaState, h: f64) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(4, 4);
    for i in 0..4 {
        let (mut xp, mut xm) = (*x, *x);
        xp[i] += h;
        xm[i] -= h;
        let (fp, fm) = (f(&xp), f(&xm));
        for r in 0..4 {
            j[(r, i)] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    j
}

/// Linearization about the upright rest state, derived by hand from the
/// Lagrangian: `M q̈ = [τ − D_r θ̇; −D_p α̇ + m g l α]`.
fn analytic_upright(p: &FurutaParams) -> DMatrix<f64> {
    let l = p.pendulum_length / 2.0;
    let mp = p.pendulum_mass;
    let j0 = mp * p.pendulum_length.powi(2) / 12.0 + mp * l * l;
    let ja = p.rotor_inertia + mp * p.arm_length.powi(2);
    let c = mp * p.arm_length * l;
    let minv = Matrix2::new(ja, c, c, j0).try_inverse().unwrap();
    let stiff = minv * Matrix2::new(0.0, 0.0, 0.0, mp * p.gravity * l);
    let damp = minv * Matrix2::new(-p.rotor_damping, 0.0, 0.0, -p.pendulum_damping);
    let mut a = DMatrix::zeros(4, 4);
    a[(0, 2)] = 1.0;
    a[(1, 3)] = 1.0;
    for r in 0..2 {
        for col in 0..2 {
            a[(2 + r, col)] = stiff[(r, col)];
            a[(2 + r, 2 + col)] = damp[(r, col)];
        }
    }
    a
}

#[test]
fn upright_is_an_exact_fixed_point() {
    let p = FurutaParams::default();
    assert_eq!(furuta_rhs(&p, &[0.0; 4], 0.0), [0.0; 4]);
    let mut s = [0.0; 4];
    for _ in 0..1000 {
        s = furuta_step(&p, &s, 0.0, 0.002);
    }
    assert_eq!(s, [0.0; 4]);
}

#[test]
fn upright_linearization_is_unstable() {
    let p = FurutaParams::default();
    let fd = jacobian(|x| furuta_rhs(&p, x, 0.0), &[0.0; 4], 1e-6);
    let exact = analytic_upright(&p);
    assert!((&fd - &exact).amax() <= 1e-6 * exact.amax());
    let eig = spectrum(&exact).unwrap().eigenvalues;
    assert!(eig.iter().any(|l| l.re > 1.0 && l.im.abs() < 1e-12), "{eig:?}");
}

#[test]
fn undamped_energy_is_conserved() {
    let p = FurutaParams {
        rotor_damping: 0.0,
        pendulum_damping: 0.0,
        ..FurutaParams::default()
    };
    let mut s = [0.2, 0.3, 1.0, -0.5];
    let e0 = mechanical_energy(&p, &s);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        s = furuta_step_torque(&p, &s, 0.0, 0.002);
        worst = worst.max((mechanical_energy(&p, &s) - e0).abs());
    }
    assert!(worst / e0.abs() <= 1e-6, "{:e}", worst / e0.abs());
}

#[test]
fn pd_loop_regulates_upright() {
    let p = FurutaParams::default();
    let dt = 0.002;
    let ad = jacobian(|x| furuta_step(&p, x, 0.0, dt), &[0.0; 4], 1e-6);
    let h = 1e-6;
    let (sp, sm) = (furuta_step(&p, &[0.0; 4], h, dt), furuta_step(&p, &[0.0; 4], -h, dt));
    let bd = DMatrix::from_fn(4, 1, |r, _| (sp[r] - sm[r]) / (2.0 * h));
    let c = DMatrix::from_fn(2, 4, |r, col| if r == col { 1.0 } else { 0.0 });
    let plant = StateSpace::new(ad, bd, c, DMatrix::zeros(2, 1), dt).unwrap();
    let ctrl = PdConfig::default().build(dt).unwrap();
    let cl = feedback_interconnect(&ctrl.ss, &plant).unwrap();
    assert!(spectrum(cl.a()).unwrap().spectral_radius < 1.0);
}

#[test]
fn dataset_is_deterministic_and_fast() {
    let cfg = DatasetConfig::default();
    let start = Instant::now();
    let a = simulate_dataset(&cfg).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "{elapsed} s");
    let b = simulate_dataset(&cfg).unwrap();
    assert_eq!(a.train.len() + a.test.len(), 50);
    assert_eq!(a.train, b.train);
    assert_eq!(a.test, b.test);
    assert_eq!(a.seeds, b.seeds);
    // 30 training episodes, 9500 kept samples, 10 delays, one sample lost to the shift
    let kept: usize = a.train.iter().map(|e| e.len() - 11).sum();
    assert_eq!(kept, 30 * (9500 - 11));
}

#[test]
fn dataset_files_round_trip() {
    let cfg = DatasetConfig {
        n_train: 2,
        n_test: 1,
        episode: EpisodeConfig {
            duration: 2.0,
            ..EpisodeConfig::default()
        },
        ..DatasetConfig::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let manifest = generate_dataset(&cfg, dir.path()).unwrap();
    assert_eq!(manifest.hash, cfg.hash());
    let (loaded, data) = load_dataset(dir.path()).unwrap();
    assert_eq!(loaded, manifest);
    let fresh = simulate_dataset(&cfg).unwrap();
    for (x, y) in data.train.iter().chain(&data.test).zip(fresh.train.iter().chain(&fresh.test)) {
        assert_eq!(x.index, y.index);
        assert!((&x.plant_states - &y.plant_states).amax() <= 1e-12);
        assert!((&x.plant_input - &y.plant_input).amax() <= 1e-12);
    }
}

#[test]
fn measurements_on_encoder_grid() {
    let cfg = EpisodeConfig {
        duration: 2.0,
        quantize: true,
        noise_std: 0.002,
        ..EpisodeConfig::default()
    };
    let ctrl = PdConfig::default().build(cfg.dt).unwrap();
    let ep = run_closed_loop_episode(&FurutaParams::default(), &ctrl, &Excitation::default().reseeded(3), &cfg, 3, 0)
        .unwrap()
        .into_result()
        .unwrap();
    for v in ep.plant_states.iter() {
        let steps = v / ENCODER_STEP;
        assert!((steps - steps.round()).abs() < 1e-9);
    }
}

#[test]
fn voltage_saturates() {
    let cfg = EpisodeConfig {
        duration: 0.02,
        discard: 0.0,
        ..EpisodeConfig::default()
    };
    let mut exc = Excitation::default().reseeded(1);
    exc.feedforward.amplitude = 50.0;
    let ctrl = PdConfig::default().build(cfg.dt).unwrap();
    let p = FurutaParams::default();
    let ep = match run_closed_loop_episode(&p, &ctrl, &exc, &cfg, 1, 0).unwrap() {
        EpisodeOutcome::Completed(ep) => ep,
        other => panic!("{other:?}"),
    };
    assert!(ep.plant_input.amax() <= p.voltage_limit);
    assert!(ep.plant_input.iter().any(|u| u.abs() == p.voltage_limit));
}

#[test]
fn fall_reports_seed() {
    let cfg = EpisodeConfig {
        duration: 5.0,
        initial_state: [0.0, 0.3, 0.0, 0.0],
        ..EpisodeConfig::default()
    };
    let ctrl = PdConfig {
        kp: [0.0; 2],
        kd: [0.0; 2],
        ..PdConfig::default()
    }
    .build(cfg.dt)
    .unwrap();
    let out = run_closed_loop_episode(&FurutaParams::default(), &ctrl, &Excitation::default(), &cfg, 42, 5).unwrap();
    assert!(matches!(out, EpisodeOutcome::Fell { index: 5, seed: 42, .. }));
    let err = out.into_result().unwrap_err();
    assert!(matches!(err, Error::EpisodeFailed { seed: 42, .. }));
    assert!(err.to_string().contains("seed 42"));
}
